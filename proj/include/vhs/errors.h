#pragma once

#include <stdexcept>
#include <string>

namespace vhs {

// Every failure raised by the library derives from Error so the CLI can map
// it to an exit code without string matching.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

class DomainError : public Error {
  public:
    using Error::Error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class DegeneratePortfolioError : public Error {
  public:
    using Error::Error;
};

class RankDeficiencyError : public Error {
  public:
    using Error::Error;
};

class ConvergenceError : public Error {
  public:
    using Error::Error;
};

class DivergenceError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

class UnsupportedError : public Error {
  public:
    using Error::Error;
};

}  // namespace vhs
