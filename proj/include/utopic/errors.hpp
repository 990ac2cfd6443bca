#pragma once

#include <stdexcept>
#include <string>

namespace utopic {

/// Operand extents do not agree (matmul inner dims, layer widths, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Cropping or sampling produced an unusable pair.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No non-slack correspondence was selected, so no transform can be solved.
class NoCorrespondence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fewer than three weighted pairs were handed to the rigid solver.
class UnderDeterminedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or forward value became NaN/Inf during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint version or dimensions do not match the requested model.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace utopic
