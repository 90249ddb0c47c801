#include "defgrid/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace defgrid {

int effective_threads(std::size_t count, int max_threads) {
    if (max_threads <= 1 || count <= 1) return 1;
    return static_cast<int>(std::min<std::size_t>(count, static_cast<std::size_t>(max_threads)));
}

void parallel_for(std::size_t count, int max_threads, const std::function<void(std::size_t)>& fn) {
    const int workers = effective_threads(count, max_threads);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < count;
                     i += static_cast<std::size_t>(workers)) {
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace defgrid
