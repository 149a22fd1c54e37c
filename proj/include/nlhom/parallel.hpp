#pragma once

// Thread-count control, parallel loops, and order-fixed compensated summation.
//
// Every reduction in the library goes through deterministic_sum: the index
// range is cut into chunks whose boundaries depend only on the range length,
// each chunk is summed sequentially with Neumaier compensation, and chunk
// partials are combined in index order. Results are therefore bit-identical
// for any worker count.

#include <cstddef>
#include <functional>
#include <vector>

namespace nlhom {

/// Neumaier-compensated accumulator.
template <typename Scalar>
class CompensatedSum {
 public:
  CompensatedSum& operator+=(Scalar x) {
    const Scalar t = sum_ + x;
    if (abs_(sum_) >= abs_(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }
  Scalar value() const { return sum_ + comp_; }

 private:
  static Scalar abs_(Scalar v) { return v < Scalar(0) ? -v : v; }
  Scalar sum_{0};
  Scalar comp_{0};
};

/// Worker count used by parallel_for. Initialized from NLHOM_THREADS, else 1.
int thread_count();
void set_thread_count(int count);

/// Runs body(begin, end) over [0, count) split into fixed chunks of `grain`
/// indices. Chunks are distributed over workers; each chunk runs on one worker.
void parallel_for_chunks(std::size_t count, std::size_t grain,
                         const std::function<void(std::size_t, std::size_t)>& body);

/// Runs body(i) for every i in [0, count).
template <typename Body>
void parallel_for(std::size_t count, Body&& body, std::size_t grain = 64) {
  parallel_for_chunks(count, grain, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) body(i);
  });
}

inline constexpr std::size_t kReductionChunk = 256;

/// Order-fixed compensated sum of term(i) over [0, count).
template <typename Term>
double deterministic_sum(std::size_t count, Term&& term) {
  if (count == 0) return 0.0;
  const std::size_t chunks = (count + kReductionChunk - 1) / kReductionChunk;
  std::vector<double> partial(chunks, 0.0);
  parallel_for_chunks(chunks, 1, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t c = cb; c < ce; ++c) {
      CompensatedSum<double> acc;
      const std::size_t b = c * kReductionChunk;
      const std::size_t e = b + kReductionChunk < count ? b + kReductionChunk : count;
      for (std::size_t i = b; i < e; ++i) acc += term(i);
      partial[c] = acc.value();
    }
  });
  CompensatedSum<double> total;
  for (double p : partial) total += p;
  return total.value();
}

}  // namespace nlhom
