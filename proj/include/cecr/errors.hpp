// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>
#include <string>

namespace cecr
{

/// Invalid input or configuration. Maps to CLI exit code 2.
class InputError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical stage failed: factorization, convergence, inconsistency.
/// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A hypothesis of a bound does not hold, so no certified value is emitted.
/// Maps to CLI exit code 4.
class CertificationRefused : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace cecr
