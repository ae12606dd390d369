// parallel.hpp — voxel-parallel loops and deterministic reductions.
#pragma once

#include <cstddef>
#include <vector>

namespace asl {

void set_threads(int n); // n <= 0 restores the hardware default
int thread_count();

namespace detail {
void parallel_blocks(std::size_t n_blocks, void (*run)(std::size_t, void *), void *ctx);
}

// Fixed block size so that reduction results do not depend on the thread
// count: partial sums per block, combined serially in block order.
inline constexpr std::size_t kReduceBlock = 4096;

std::size_t for_grain(std::size_t n); // adaptive grain for plain loops

// Disjoint-write loop; scheduling never affects the result.
template <class Body>
void parallel_for(std::size_t n, Body &&body)
{
    if (n == 0)
        return;
    struct Ctx {
        Body *body;
        std::size_t n, grain;
    } ctx{&body, n, for_grain(n)};
    const std::size_t n_blocks = (n + ctx.grain - 1) / ctx.grain;
    detail::parallel_blocks(
        n_blocks,
        [](std::size_t b, void *p) {
            auto *c = static_cast<Ctx *>(p);
            const std::size_t lo = b * c->grain;
            const std::size_t hi = lo + c->grain < c->n ? lo + c->grain : c->n;
            for (std::size_t i = lo; i < hi; ++i)
                (*c->body)(i);
        },
        &ctx);
}

// Deterministic sum of term(i) for i in [0, n): bitwise-stable for any
// thread count.
template <class Term>
double block_sum(std::size_t n, Term &&term)
{
    const std::size_t n_blocks = (n + kReduceBlock - 1) / kReduceBlock;
    std::vector<double> partial(n_blocks, 0.0);
    struct Ctx {
        Term *term;
        double *partial;
        std::size_t n;
    } ctx{&term, partial.data(), n};
    detail::parallel_blocks(
        n_blocks,
        [](std::size_t b, void *p) {
            auto *c = static_cast<Ctx *>(p);
            const std::size_t lo = b * kReduceBlock;
            const std::size_t hi = lo + kReduceBlock < c->n ? lo + kReduceBlock : c->n;
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i)
                s += (*c->term)(i);
            c->partial[b] = s;
        },
        &ctx);
    double total = 0.0;
    for (double s : partial)
        total += s;
    return total;
}

} // namespace asl
