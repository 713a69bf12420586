#pragma once

#include <algorithm>

#include "hedgelab/errors.hpp"

namespace hedgelab {

/// European call payoff (S - K)^+.
struct CallPayoff {
    double strike = 1.0;

    double operator()(double s) const { return std::max(s - strike, 0.0); }

    void validate() const {
        if (!(strike > 0.0)) throw ValidationError("CallPayoff: strike must be > 0");
    }
};

}  // namespace hedgelab
