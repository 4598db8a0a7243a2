#pragma once

#include <cstddef>
#include <functional>

namespace stsopro {

enum class ExecutionPolicy { serial, parallel };

/// Runs body(i) for every agent i in [0, n).
///
/// `parallel` distributes agents over OpenMP threads; `serial` is the plain
/// reference loop. Bodies must only write agent-owned state. An exception
/// thrown by any body is rethrown after the loop; when several agents fail the
/// lowest index wins, so error reporting does not depend on scheduling.
void for_each_agent(ExecutionPolicy policy, std::size_t n,
                    const std::function<void(std::size_t)>& body);

/// omp_get_max_threads(), or 1 without OpenMP.
int max_threads();

}  // namespace stsopro
