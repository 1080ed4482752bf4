#ifndef BAYESRUL_ERROR_HPP_
#define BAYESRUL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace bayesrul {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violates a documented precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Per-unit least squares fit is impossible or yields zero slope variance.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in the sampler state.
class ChainDivergence : public Error {
 public:
  ChainDivergence(const std::string& update, long iteration)
      : Error("chain diverged in " + update + " at iteration " +
              std::to_string(iteration)),
        update_(update),
        iteration_(iteration) {}

  const std::string& update() const noexcept { return update_; }
  long iteration() const noexcept { return iteration_; }

 private:
  std::string update_;
  long iteration_;
};

/// No posterior draw survived filtering, so the residual life is undefined.
class EmptyPosterior : public Error {
 public:
  using Error::Error;
};

/// The residual-life distribution has (numerically) no mass on t > 0.
class DegenerateDistribution : public Error {
 public:
  using Error::Error;
};

/// A transformation-based chain never accepted a move.
class StuckChain : public Error {
 public:
  using Error::Error;
};

/// A simulated path never reached the threshold.
class NoCrossing : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace bayesrul

#endif  // BAYESRUL_ERROR_HPP_
