#include "deint/parallel.hpp"

#include <cstdlib>
#include <string>

#include "deint/error.hpp"

namespace deint {

int default_worker_count() {
    const char* env = std::getenv("DEINT_WORKERS");
    if (env == nullptr || *env == '\0') return 1;
    try {
        std::size_t used = 0;
        const int n = std::stoi(env, &used);
        if (used == std::string(env).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("DEINT_WORKERS must be a positive integer, got '" + std::string(env) + "'");
}

}  // namespace deint
