#pragma once

#include <json.hpp>

#include <iosfwd>

namespace dmldeep::cli {

// An invocation is {"command": name, "args": {...}, "config": resolved run config or null}.
// Every command writes it as run.json next to its outputs, so `rerun` can replay it.
// Returns the process exit code; library errors propagate as exceptions.
int execute(const nlohmann::json& invocation, std::ostream& out);

// Exit code for an exception escaping execute(): 2 validation, 3 numerical, 4 I/O, 1 otherwise.
int exit_code_for_current_exception(std::ostream& err);

}  // namespace dmldeep::cli
