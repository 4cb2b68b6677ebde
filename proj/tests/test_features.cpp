#include <doctest.h>

#include <cmath>
#include <complex>

#include "nots/features.hpp"

using namespace nots;

namespace {

FeatureSpec small_spec(int L = 4) {
  FeatureSpec s;
  s.segment_length = L;
  s.ssc_threshold = 0.5;
  s.wamp_threshold = 0.5;
  return s;
}

LabeledSample sample_of(std::vector<double> data) {
  const int n = static_cast<int>(data.size());
  LabeledSample s;
  s.signal = Signal({1, n}, std::move(data));
  return s;
}

}  // namespace

TEST_CASE("ssc on a constant segment is zero") {
  auto out = ssc(std::vector<double>(8, 3.0), small_spec());
  CHECK(out == std::vector<double>{0.0, 0.0});
}

TEST_CASE("ssc counts monotone interior points under the as-written formula") {
  // Ramp [0,1,2,3]: interior i has (v_i - v_{i-1})(v_i - v_{i+1}) = (1)(-1) < 0
  // and max step 1 >= 0.5, so every interior point counts.
  auto out = ssc({0, 1, 2, 3}, small_spec());
  REQUIRE(out.size() == 1);
  CHECK(out[0] == 2.0);  // L - 2 interior points
}

TEST_CASE("ssc threshold gate closes for large delta") {
  FeatureSpec spec = small_spec();
  spec.ssc_threshold = 10.0;
  auto out = ssc({0, 1, 2, 3}, spec);
  CHECK(out[0] == 0.0);
}

TEST_CASE("wamp counts unit steps") {
  auto out = wamp({0, 1, 0, 1}, small_spec());
  REQUIRE(out.size() == 1);
  CHECK(out[0] == 3.0);
}

TEST_CASE("wamp threshold is inclusive: uniform ramp of step s at delta s") {
  FeatureSpec spec = small_spec(8);
  spec.wamp_threshold = 0.25;
  std::vector<double> ramp(8);
  for (int i = 0; i < 8; ++i) ramp[i] = 0.25 * i;
  auto out = wamp(ramp, spec);
  CHECK(out[0] == 7.0);  // L - 1 steps, each exactly at threshold
}

TEST_CASE("wamp with a huge threshold is zero") {
  FeatureSpec spec = small_spec();
  spec.wamp_threshold = 1e18;
  CHECK(wamp({0, 5, -5, 9}, spec)[0] == 0.0);
}

TEST_CASE("ssc and wamp are invariant to constant shifts") {
  FeatureSpec spec = small_spec(8);
  std::vector<double> v = {0.1, 0.9, -0.5, 1.2, 0.2, 0.8, -1.0, 0.4};
  std::vector<double> shifted = v;
  for (double& x : shifted) x += 7.5;
  CHECK(ssc(v, spec) == ssc(shifted, spec));
  CHECK(wamp(v, spec) == wamp(shifted, spec));
}

TEST_CASE("segment permutation permutes features identically") {
  FeatureSpec spec = small_spec(4);
  std::vector<double> a = {0, 1, 0, 1, 5, 5, 5, 5};
  std::vector<double> b = {5, 5, 5, 5, 0, 1, 0, 1};
  auto fa = wamp(a, spec), fb = wamp(b, spec);
  CHECK(fa[0] == fb[1]);
  CHECK(fa[1] == fb[0]);
}

TEST_CASE("band power: constant segment has zero band power") {
  FeatureSpec spec;  // default bands, L=32, fs=128
  auto out = band_power(std::vector<double>(32, 4.0), spec);
  REQUIRE(out.size() == 3);
  for (double p : out) CHECK(p == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("pure 8 Hz tone lands entirely in the [5,10] band") {
  FeatureSpec spec;
  const int L = 32;
  std::vector<double> tone(L);
  for (int t = 0; t < L; ++t) tone[t] = std::sin(2.0 * M_PI * 2.0 * t / L);  // bin 2 = 8 Hz
  auto out = band_power(tone, spec);
  REQUIRE(out.size() == 3);
  CHECK(out[0] > 1e-6);
  CHECK(std::abs(out[1]) < 1e-9);
  CHECK(std::abs(out[2]) < 1e-9);
}

TEST_CASE("doubling amplitude multiplies band power by 4") {
  FeatureSpec spec;
  const int L = 32;
  std::vector<double> tone(L), tone2(L);
  for (int t = 0; t < L; ++t) {
    tone[t] = std::sin(2.0 * M_PI * 5.0 * t / L);
    tone2[t] = 2.0 * tone[t];
  }
  auto p1 = band_power(tone, spec), p2 = band_power(tone2, spec);
  for (std::size_t i = 0; i < p1.size(); ++i)
    CHECK(p2[i] == doctest::Approx(4.0 * p1[i]).epsilon(1e-9));
}

TEST_CASE("band partition of [0, fs/2] plus DC recovers total energy (Parseval)") {
  FeatureSpec spec;
  spec.segment_length = 32;
  spec.sampling_rate = 128.0;
  spec.bands = {{0.1, 30.0}, {30.1, 64.0}};
  std::vector<double> v(32);
  for (int t = 0; t < 32; ++t) v[t] = std::sin(0.7 * t) + 0.3 * std::cos(2.1 * t) + 0.5;
  auto out = band_power(v, spec);

  // Full spectrum energy bookkeeping: sum |X[m]|^2 over m=0..N-1 equals
  // N * sum v^2. Positive-half bins m=1..15 pair with mirrored bins.
  auto spec_full = FeatureSpec{};
  (void)spec_full;
  double total = 0.0;
  {
    // recompute via the feature itself with a DC-excluding wide band plus DC
    // handled analytically
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= 32.0;
    double dc_power = (mean * 32.0) * (mean * 32.0);
    double sumsq = 0.0;
    for (double x : v) sumsq += x * x;
    const double full_energy = 32.0 * sumsq;  // Parseval for length-32 DFT
    // Nyquist bin (m=16) and mirrored bins m=17..31.
    // Positive-half band powers cover m=1..16 once; mirrors double m=1..15.
    // Reconstruct: full = dc + nyq + 2 * (bins 1..15).
    // The two bands cover bins 1..16 exactly once (4..120+ Hz bins: 4*m Hz).
    double half = out[0] + out[1];
    double nyq = 0.0;
    {
      std::complex<double> acc(0, 0);
      for (int t = 0; t < 32; ++t)
        acc += v[t] * std::exp(std::complex<double>(0, -M_PI * t));
      nyq = std::norm(acc);
    }
    total = dc_power + nyq + 2.0 * (half - nyq);
    CHECK(total == doctest::Approx(full_energy).epsilon(1e-9));
  }
}

TEST_CASE("spec validation rejects unresolvable bands") {
  FeatureSpec spec;
  spec.segment_length = 32;
  spec.sampling_rate = 128.0;  // bin spacing 4 Hz
  spec.bands = {{5.0, 7.0}};   // no multiple of 4 inside
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.bands = {{0.0, 10.0}};  // starts at DC
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("band above Nyquist is truncated in effective_bands") {
  FeatureSpec spec;
  auto eff = spec.effective_bands();
  REQUIRE(eff.size() == 3);
  CHECK(eff[2].first == 30.0);
  CHECK(eff[2].second == 64.0);  // fs/2
}

TEST_CASE("feature dims match the declared table: 1 / 32 / 32 / 96") {
  FeatureSpec spec;  // L = 32
  CHECK(feature_dim("hurst", 1024, spec) == 1);
  CHECK(feature_dim("ssc", 1024, spec) == 32);
  CHECK(feature_dim("wamp", 1024, spec) == 32);
  CHECK(feature_dim("band_power", 1024, spec) == 96);
  CHECK_THROWS_AS(feature_dim("nope", 1024, spec), std::invalid_argument);
}

TEST_CASE("feature_targets dispatch and validation") {
  LabeledSample s = sample_of(std::vector<double>(64, 0.0));
  s.labels["hurst"] = {0.7};
  FeatureSpec spec = small_spec(4);
  spec.bands = {{1.0, 64.0}};
  spec.sampling_rate = 128.0;

  CHECK(feature_targets(s, spec, "hurst") == std::vector<double>{0.7});
  CHECK(feature_targets(s, spec, "ssc").size() == 16);
  CHECK(feature_targets(s, spec, "wamp").size() == 16);
  CHECK(feature_targets(s, spec, "band_power").size() == 16);
  CHECK_THROWS_AS(feature_targets(s, spec, "zc"), std::invalid_argument);

  LabeledSample no_label = sample_of(std::vector<double>(64, 0.0));
  CHECK_THROWS_AS(feature_targets(no_label, spec, "hurst"), std::invalid_argument);

  LabeledSample two_chan;
  two_chan.signal = Signal({2, 8});
  CHECK_THROWS_AS(feature_targets(two_chan, spec, "ssc"), std::invalid_argument);
}

TEST_CASE("default threshold is half the median absolute consecutive difference") {
  // Steps: |1|,|1|,|1|,|5| -> sorted {1,1,1,5}, median (upper) 1 -> 0.5.
  auto s = sample_of({0, 1, 2, 3, 8});
  const double thr = default_threshold({s});
  CHECK(thr == doctest::Approx(0.5));
}
