#include "chaosbench/experiments.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace chaosbench {

namespace {

struct Block {
    Index start;
    Index len;
};

std::vector<Block> blocks_from_end(Index rows, int k) {
    std::vector<Block> blocks;
    const Index rem = rows % k;
    if (rem > 0) blocks.push_back({0, rem});
    for (Index s = rem; s < rows; s += k) blocks.push_back({s, k});
    return blocks;
}

Matrix assemble(const Eigen::Ref<const Matrix>& src, const std::vector<Block>& blocks,
                const std::vector<std::size_t>& order) {
    Matrix out(src.rows(), src.cols());
    Index pos = 0;
    for (std::size_t b : order) {
        out.middleRows(pos, blocks[b].len) = src.middleRows(blocks[b].start, blocks[b].len);
        pos += blocks[b].len;
    }
    return out;
}

}  // namespace

Matrix kgram_shuffle(const Eigen::Ref<const Matrix>& context, int k, Seed seed, ShuffleOptions opts) {
    const Index c = context.rows();
    if (k < 1 || 2 * static_cast<Index>(k) > c)
        throw InvalidArgument("kgram_shuffle: k must satisfy 1 <= k <= C/2 (k=" + std::to_string(k) +
                              ", C=" + std::to_string(c) + ")");
    if (opts.max_draws < 1) throw InvalidArgument("kgram_shuffle: max_draws must be >= 1");

    const auto blocks = blocks_from_end(c, k);
    const std::size_t movable = opts.keep_final_block ? blocks.size() - 1 : blocks.size();
    if (movable < 2)
        throw ShuffleImpossible("kgram_shuffle: fewer than two movable blocks (k=" + std::to_string(k) +
                                ", C=" + std::to_string(c) + ")");

    std::vector<std::size_t> order(blocks.size());
    std::mt19937_64 rng(seed);
    for (int draw = 0; draw < opts.max_draws; ++draw) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(movable), rng);
        Matrix out = assemble(context, blocks, order);
        const bool accepted = opts.keep_final_block
                                  ? out.middleRows(c - 2 * k, k) != context.middleRows(c - 2 * k, k)
                                  : out != context;
        if (accepted) return out;
    }
    throw ShuffleImpossible("kgram_shuffle: no admissible arrangement after " + std::to_string(opts.max_draws) +
                            " draws (blocks are indistinguishable)");
}

Vector nonstationarity_factors(Index length, double f_min) {
    if (!(f_min > 0.0) || f_min > 1.0) throw InvalidArgument("nonstationarity: f_min must lie in (0, 1]");
    if (length < 1) throw InvalidArgument("nonstationarity: empty series");
    Vector f(length);
    if (length == 1) {
        f(0) = 1.0;
        return f;
    }
    const double rate = std::log(f_min) / static_cast<double>(length - 1);
    for (Index t = 0; t < length; ++t) f(t) = std::exp(static_cast<double>(t) * rate);
    f(length - 1) = f_min;
    return f;
}

Matrix apply_nonstationarity(const Eigen::Ref<const Matrix>& values, double f_min) {
    const Vector f = nonstationarity_factors(values.rows(), f_min);
    return f.asDiagonal() * values;
}

Trajectory apply_nonstationarity(const Trajectory& traj, double f_min) {
    Trajectory out = traj;
    out.values = apply_nonstationarity(traj.values, f_min);
    return out;
}

}  // namespace chaosbench
