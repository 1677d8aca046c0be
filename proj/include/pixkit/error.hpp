// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace pixkit
{

/// Base for every error the library throws. Operations that report failures as
/// values (visual-op execution, tool-call parsing) do not use these.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Input data does not satisfy a documented precondition.
class InvalidInput : public Error
{
  public:
    using Error::Error;
};

/// A transcript breaks the invocation/outcome alternation rule.
class ProtocolViolation : public Error
{
  public:
    using Error::Error;
};

/// Reward or advantage computation over a group with no records.
class EmptyGroup : public Error
{
  public:
    EmptyGroup(): Error("rollout group is empty") {}
};

class GroupTooSmall : public Error
{
  public:
    explicit GroupTooSmall(std::size_t size):
        Error("advantage group needs at least 2 rewards, got " + std::to_string(size))
    {
    }
};

/// The policy or text-generation backend could not produce a response.
class BackendUnavailable : public Error
{
  public:
    using Error::Error;
};

class IoError : public Error
{
  public:
    using Error::Error;
};

} // namespace pixkit
