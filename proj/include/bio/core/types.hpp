#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bio {

// Rounds are 1-based (t = 1..T); actions and states are 0-based indices.
using Round = std::size_t;
using ActionId = std::size_t;
using StateId = std::size_t;

using Matrix = std::vector<std::vector<double>>;

// Bad caller input: out-of-range indices, invalid parameters.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Protocol misuse: feeding a round twice, arrivals for unknown rounds.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Numerical or internal failure that should be unreachable on valid input.
struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A hard invariant failed while auditing an episode.
class AuditError : public std::runtime_error {
public:
    AuditError(std::string invariant, Round round, const std::string& detail)
        : std::runtime_error(invariant + " violated at round " + std::to_string(round) + ": " + detail),
          invariant_(std::move(invariant)), round_(round) {}

    const std::string& invariant() const noexcept { return invariant_; }
    Round round() const noexcept { return round_; }

private:
    std::string invariant_;
    Round round_;
};

// A loss (or estimate) revealed to a learner for a past round.
struct Arrival {
    Round round;
    double loss;
};

} // namespace bio
