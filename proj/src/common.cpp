#include "springverb/common.hpp"

#include <cstdlib>
#include <thread>

namespace springverb {

int worker_count() {
    static const int cap = [] {
        if (const char* env = std::getenv("SPRINGVERB_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? static_cast<int>(hw) : 1;
    }();
    return cap;
}

}  // namespace springverb
