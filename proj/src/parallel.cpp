#include "aslfit/parallel.hpp"

#include <omp.h>

namespace asl {

namespace {
int g_threads = 0; // 0 = hardware default
}

void set_threads(int n)
{
    g_threads = n > 0 ? n : 0;
}

int thread_count()
{
    return g_threads > 0 ? g_threads : omp_get_max_threads();
}

std::size_t for_grain(std::size_t n)
{
    const std::size_t target = static_cast<std::size_t>(thread_count()) * 8;
    std::size_t grain = n / target;
    return grain == 0 ? 1 : grain;
}

namespace detail {

void parallel_blocks(std::size_t n_blocks, void (*run)(std::size_t, void *), void *ctx)
{
    if (n_blocks <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b)
            run(b, ctx);
        return;
    }
    const int nt = thread_count();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long long b = 0; b < static_cast<long long>(n_blocks); ++b)
        run(static_cast<std::size_t>(b), ctx);
}

} // namespace detail
} // namespace asl
