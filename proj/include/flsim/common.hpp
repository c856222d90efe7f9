// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace flsim {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Sample-major storage: one row per sample, so batch gathers copy contiguous rows.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;
using RowMatrixXd = RowMatrix<double>;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

using ClientId = int;

// Error hierarchy. Every failure the library reports derives from Error so
// callers can map categories onto exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class InfeasiblePartitionError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int round_idx, long batch_idx)
      : Error(what), round_idx_(round_idx), batch_idx_(batch_idx) {}

  int round_idx() const { return round_idx_; }
  long batch_idx() const { return batch_idx_; }

 private:
  int round_idx_;
  long batch_idx_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field = {}, int line = 0)
      : Error(what), field_(std::move(field)), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

class ReproducibilityError : public Error {
 public:
  ReproducibilityError(const std::string& what, std::string field)
      : Error(what), field_(std::move(field)) {}

  /// JSON pointer of the first divergent field.
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace flsim
