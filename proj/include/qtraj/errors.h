// Copyright 2026 The qtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QTRAJ_ERRORS_H
#define QTRAJ_ERRORS_H

#include <stdexcept>
#include <string>

namespace qtraj {

/// Bad caller input: arguments out of range, malformed config, unknown names.
/// The CLI maps this family to exit code 2.
class InvalidArgument : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent sizes between inputs (grid vs. trajectory, model vs. vector).
class DimensionError : public InvalidArgument {
   public:
    using InvalidArgument::InvalidArgument;
};

/// Problems with the data itself (files, labels, missing classes). Exit code 3.
class DataError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class StratificationError : public DataError {
   public:
    using DataError::DataError;
};

class UndefinedFidelity : public DataError {
   public:
    using DataError::DataError;
};

class EmptyPool : public DataError {
   public:
    using DataError::DataError;
};

/// Numerical failures. Exit code 4.
class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class IntegrationDiverged : public NumericalError {
   public:
    using NumericalError::NumericalError;
};

class DegenerateKernel : public NumericalError {
   public:
    using NumericalError::NumericalError;
};

class FitFailed : public NumericalError {
   public:
    using NumericalError::NumericalError;
};

class SingularCovariance : public NumericalError {
   public:
    SingularCovariance(const std::string &what, double condition_number)
        : NumericalError(what), condition_number_(condition_number) {}
    double condition_number() const { return condition_number_; }

   private:
    double condition_number_;
};

class ConvergenceError : public NumericalError {
   public:
    ConvergenceError(const std::string &what, double max_kkt_violation)
        : NumericalError(what), max_kkt_violation_(max_kkt_violation) {}
    double max_kkt_violation() const { return max_kkt_violation_; }

   private:
    double max_kkt_violation_;
};

}  // namespace qtraj

#endif
