// Finds the smallest c such that the retrieval head at p = c * ceil(log2 n),
// frac_bits = ceil(log2 n) concentrates to a quantized weight of exactly 1
// for every n in [lo, hi] and every probed query. The result is frozen as
// kRetrievalPrecisionConstant.
#include <cstdlib>
#include <iostream>
#include <string>

#include <attnlab/constructions.hpp>
#include <attnlab/errors.hpp>

using namespace attnlab;

namespace {

// First failing n for constant c, or 0 when the whole range passes.
std::uint64_t first_failure(int c, std::uint64_t lo, std::uint64_t hi, std::string& why) {
  for (std::uint64_t n = lo; n <= hi; ++n) {
    const int D = retrieval_key_width(n);
    try {
      const auto cfg = retrieval_precision(n, c);
      for (std::uint64_t q : {std::uint64_t{1}, n / 2 + 1, n}) {
        const auto r = retrieval_concentration(n, D, cfg, q);
        if (!r.quantizes_to_one || !r.mismatches_quantize_to_zero) {
          why = "weight " + std::to_string(r.match_weight.get_d()) + " at query " + std::to_string(q);
          return n;
        }
      }
    } catch (const Error& e) {
      why = e.what();
      return n;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::uint64_t lo = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 8;
  const std::uint64_t hi = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 256;
  for (int c = 1; c <= 8; ++c) {
    std::string why;
    const auto bad = first_failure(c, lo, hi, why);
    if (bad == 0) {
      std::cout << "c = " << c << " passes n in [" << lo << ", " << hi << "]\n";
      return c == kRetrievalPrecisionConstant ? 0 : 1;
    }
    std::cout << "c = " << c << " fails at n = " << bad << ": " << why << "\n";
  }
  return 1;
}
