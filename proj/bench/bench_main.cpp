// Times each kernel's serial reference against the OpenMP variant and
// verifies bit-identical results while at it. Not a ctest; run by hand:
//   ./build/bench/himm_bench [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <random>
#include <vector>

#include "himm/kernels.hpp"

using namespace himm;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_of(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

template <typename F>
double time_best_of(int repeats, F&& f) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = Clock::now();
        f();
        const auto t1 = Clock::now();
        best = std::min(best, seconds_of(t0, t1));
    }
    return best;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-20s serial %9.4f ms   parallel %9.4f ms   speedup %5.2fx   %s\n",
                name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                identical ? "identical" : "MISMATCH");
    if (!identical) std::exit(1);
}

} // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<float> uf(-1.0f, 1.0f);
    std::uniform_real_distribution<double> ud(-50.0, 50.0);

    {
        const size_t n = 20000, dim = 384;
        std::vector<float> data(n * dim), query(dim);
        for (float& v : data) v = uf(rng);
        for (float& v : query) v = uf(rng);
        std::vector<float> out_s(n), out_p(n);
        const double ts = time_best_of(repeats, [&] {
            kernels::score_rows_serial(data.data(), n, dim, query.data(), out_s.data());
        });
        const double tp = time_best_of(repeats, [&] {
            kernels::score_rows_parallel(data.data(), n, dim, query.data(), out_p.data());
        });
        report("score_rows", ts, tp,
               std::memcmp(out_s.data(), out_p.data(), n * sizeof(float)) == 0);

        const auto top_s = kernels::topk_serial(data.data(), n, dim, query.data(), 32);
        const auto top_p = kernels::topk_parallel(data.data(), n, dim, query.data(), 32);
        bool same = top_s.size() == top_p.size();
        for (size_t i = 0; same && i < top_s.size(); ++i)
            same = top_s[i].index == top_p[i].index && top_s[i].score == top_p[i].score;
        const double ks = time_best_of(repeats, [&] {
            (void)kernels::topk_serial(data.data(), n, dim, query.data(), 32);
        });
        const double kp = time_best_of(repeats, [&] {
            (void)kernels::topk_parallel(data.data(), n, dim, query.data(), 32);
        });
        report("topk", ks, kp, same);
    }

    {
        const int w = 2048, h = 2048;
        std::vector<uint8_t> cells(size_t(w) * size_t(h));
        std::uniform_int_distribution<int> us(0, 2);
        for (uint8_t& c : cells) c = uint8_t(us(rng));
        std::vector<uint8_t> mask_s(cells.size()), mask_p(cells.size());
        const double ts = time_best_of(repeats, [&] {
            kernels::frontier_mask_serial(cells.data(), w, h, mask_s.data());
        });
        const double tp = time_best_of(repeats, [&] {
            kernels::frontier_mask_parallel(cells.data(), w, h, mask_p.data());
        });
        report("frontier_mask", ts, tp,
               std::memcmp(mask_s.data(), mask_p.data(), cells.size()) == 0);
    }

    {
        const size_t n = 200000, nv = 64;
        std::vector<Vec2> points(n), verts(nv);
        for (Vec2& p : points) p = {ud(rng), ud(rng)};
        for (Vec2& v : verts) v = {ud(rng), ud(rng)};
        std::vector<double> out_s(n), out_p(n);
        const double ts = time_best_of(repeats, [&] {
            kernels::polyline_distances_serial(points.data(), n, verts.data(), nv,
                                               out_s.data());
        });
        const double tp = time_best_of(repeats, [&] {
            kernels::polyline_distances_parallel(points.data(), n, verts.data(), nv,
                                                 out_p.data());
        });
        report("polyline_distances", ts, tp,
               std::memcmp(out_s.data(), out_p.data(), n * sizeof(double)) == 0);
    }

    return 0;
}
