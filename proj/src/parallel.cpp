#include "carpet/parallel.hpp"

#include <cstdlib>
#include <string>

namespace carpet {

int default_threads() {
    if (const char* env = std::getenv("CARPET_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n > 0) return n;
        } catch (...) {
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace carpet
