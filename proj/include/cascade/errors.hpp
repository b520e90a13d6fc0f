// Copyright 2026 Cascade Planner Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

enum class Errc {
    invalid_input,
    io_error,
    empty_trace,
    no_deployed_stage,
    infeasible,
    infeasible_problem,
    no_feasible_point,
};

const char* errc_name(Errc c);

/// Process exit code for the CLI: 2 requirement unmet, 3 infeasible, 4 bad input.
int errc_exit_code(Errc c);

class CascadeError : public std::runtime_error {
public:
    CascadeError(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const { return code_; }
    const char* code_name() const { return errc_name(code_); }

private:
    Errc code_;
};

}  // namespace cascade
