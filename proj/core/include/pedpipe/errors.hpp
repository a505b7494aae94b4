// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pedpipe {

/// Shape or dimension disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Out-of-range token id or element index.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Precondition on a call argument violated (empty response, bad ratio, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data: dataset lines, records, checkpoint files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint magic/version/truncation problems.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

/// Pipeline stage ordering violated (e.g. psft before dfpo).
class StageGateError : public DataError {
 public:
  using DataError::DataError;
};

/// A generation backend call failed (after retries, for the remote backend).
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer refused a step because a gradient was non-finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training stopped on a non-finite loss or gradient; the last good weights
/// were saved to `checkpoint()` when a path was available.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::string checkpoint)
      : std::runtime_error(what), checkpoint_(std::move(checkpoint)) {}
  const std::string& checkpoint() const { return checkpoint_; }

 private:
  std::string checkpoint_;
};

/// A frozen base weight received a gradient during adapter training.
class FreezeViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace pedpipe
