#pragma once

// Built-in scenarios. Amplitudes, gains and noise levels are calibration
// choices (the experiments they imitate report none); see scenarios/*.json for
// the same presets as files.
//
//   fg        single coherent tone over a weak room background, thermal noise
//             40 dB below the tone
//   fg20      the same with thermal noise 20 dB below the tone
//   sm        stepper-motor analog: five harmonically related tones, stationary
//   bb        broadband band-limited noise, stationary
//   switching sm on for the first half, a silent gap, then bb
//   sweep     broadband source, primary coupling with true support dkx = 5
//
// The room background is four independent white sources seen by every coil.
// Without it, a single tone leaves most first-pass directions to thermal noise
// and the object signal of the central lines, and per-line responses stop
// agreeing.
//   inmodel   five periodic broadband sources, primary couplings of support 7,
//             scalar detector couplings, noise-free and decorrelated ground truth
//   volume    128 × 97 × 23 partitions, two detectors

#include <string>
#include <vector>

#include "editer/sim.hpp"

namespace editer::presets {

inline constexpr Index readout = 512;
inline constexpr Index lines = 101;
inline constexpr int detector_count = 5;
inline constexpr double noise_sigma = 0.05;
inline constexpr double emi_rms = 10.0 * noise_sigma; // 20 dB above thermal noise

inline std::vector<Shape> brain_slice(double scale = 1.0, double intensity = 1.0)
{
  return {
      {ShapeKind::ellipse, 0.0, 0.0, 150.0 * scale, 38.0 * scale, 0.0, intensity},
      {ShapeKind::ellipse, 0.0, 0.0, 138.0 * scale, 34.0 * scale, 0.0, -0.35 * intensity},
      {ShapeKind::ellipse, -45.0 * scale, -8.0 * scale, 40.0 * scale, 9.0 * scale, 20.0, 0.25 * intensity},
      {ShapeKind::ellipse, 45.0 * scale, 8.0 * scale, 40.0 * scale, 9.0 * scale, -20.0, 0.25 * intensity},
      {ShapeKind::rectangle, 0.0, 0.0, 12.0 * scale, 4.0 * scale, 0.0, 0.3 * intensity},
  };
}

inline CouplingKernel scalar_coupling(int source, int channel, cplx gain)
{
  CouplingKernel k;
  k.source = source;
  k.channel = channel;
  k.gain = gain;
  return k;
}

inline CouplingKernel fir_coupling(int source, int channel, cplx gain, std::vector<cplx> taps)
{
  CouplingKernel k;
  k.source = source;
  k.channel = channel;
  k.gain = gain;
  k.support = {static_cast<int>(taps.size()), 1};
  k.taps = CMatrix(1, static_cast<Index>(taps.size()));
  for (std::size_t i = 0; i < taps.size(); ++i)
    k.taps(0, static_cast<Index>(i)) = taps[i];
  return k;
}

inline EmiScenario base_scenario(const std::string& id)
{
  EmiScenario sc;
  sc.id = id;
  sc.readout_samples = readout;
  sc.pe_lines = lines;
  sc.detectors = detector_count;
  sc.seed = 20210601;
  sc.phantom = brain_slice(0.4, 0.15);
  sc.noise_sigma = {noise_sigma};
  sc.roi = RoiSpec{0, 31, 0, 31};
  return sc;
}

inline void add_background(EmiScenario& sc, double rms = 0.25)
{
  const double g[4][5] = {{1.0, 0.3, -0.2, 0.1, 0.4},
                          {0.2, 1.1, 0.3, -0.3, 0.1},
                          {-0.1, 0.2, 0.9, 0.4, -0.2},
                          {0.3, -0.2, 0.1, 1.2, 0.3}};
  const double primary[4] = {0.4, -0.25, 0.3, 0.2};
  for (int j = 0; j < 4; ++j) {
    EmiSource src;
    src.name = "room" + std::to_string(j);
    src.kind = SourceKind::broadband;
    src.amplitude = rms / 2.0;
    src.bandwidth = 1.0;
    src.seed = static_cast<std::uint64_t>(99 + j);
    const int si = static_cast<int>(sc.sources.size());
    sc.sources.push_back(src);
    sc.coupling.entries.push_back(scalar_coupling(si, 0, {primary[j], 0.05 * j}));
    for (int c = 1; c <= sc.detectors; ++c)
      sc.coupling.entries.push_back(scalar_coupling(si, c, {g[j][(c - 1) % 5], 0.1 * (j - c)}));
  }
}

// Stripe rows: a tone at offset f lands at image row N_kx/2 − f·N_kx.
inline EmiSource fg_source()
{
  EmiSource s;
  s.name = "fg";
  s.kind = SourceKind::single_tone;
  s.tones = {{0.46875, emi_rms, 0.0}};
  s.line_phase = LinePhase::random;
  return s;
}

inline EmiSource sm_source()
{
  EmiSource s;
  s.name = "sm";
  s.kind = SourceKind::multi_tone;
  const double f0 = 0.0952;
  const double amp = emi_rms / std::sqrt(5.0);
  for (int h = 1; h <= 5; ++h)
    s.tones.push_back({f0 * h, amp, 0.7 * h});
  s.line_phase = LinePhase::random;
  return s;
}

inline EmiSource bb_source()
{
  EmiSource s;
  s.name = "bb";
  s.kind = SourceKind::broadband;
  s.amplitude = emi_rms;
  s.bandwidth = 0.9;
  s.seed = 3;
  return s;
}

inline EmiScenario fg20()
{
  auto sc = base_scenario("fg20");
  sc.sources = {fg_source()};
  sc.coupling.entries = {
      fir_coupling(0, 0, {1.0, 0.0}, {{0.2, 0.1}, {1.0, 0.0}, {0.2, -0.1}}),
      scalar_coupling(0, 1, {0.35, 0.1}),
      scalar_coupling(0, 2, {0.2, -0.15}),
      scalar_coupling(0, 3, {0.4, 0.3}),
      scalar_coupling(0, 4, {1.3, -0.2}),
      scalar_coupling(0, 5, {1.1, 0.4}),
  };
  add_background(sc);
  return sc;
}

inline EmiScenario fg()
{
  auto sc = fg20();
  sc.id = "fg";
  sc.noise_sigma = {0.1 * noise_sigma};
  return sc;
}

inline EmiScenario sm()
{
  auto sc = base_scenario("sm");
  sc.sources = {sm_source()};
  sc.coupling.entries = {
      fir_coupling(0, 0, {1.0, 0.0}, {{0.15, 0.05}, {1.0, 0.0}, {0.25, -0.1}}),
      scalar_coupling(0, 1, {1.2, 0.3}),
      scalar_coupling(0, 2, {1.0, -0.4}),
      scalar_coupling(0, 3, {0.3, 0.1}),
      scalar_coupling(0, 4, {0.25, 0.2}),
      scalar_coupling(0, 5, {0.2, -0.1}),
  };
  add_background(sc);
  return sc;
}

inline EmiScenario bb()
{
  auto sc = base_scenario("bb");
  sc.sources = {bb_source()};
  sc.coupling.entries = {
      fir_coupling(0, 0, {1.0, 0.0}, {{0.1, 0.05}, {0.3, -0.1}, {1.0, 0.0}, {0.3, 0.2}, {0.1, -0.05}}),
      fir_coupling(0, 1, {0.3, 0.1}, {{0.3, 0.0}, {1.0, 0.0}, {0.2, 0.1}}),
      fir_coupling(0, 2, {0.25, -0.1}, {{0.2, 0.1}, {1.0, 0.0}, {0.3, 0.0}}),
      fir_coupling(0, 3, {1.2, 0.2}, {{0.4, -0.1}, {1.0, 0.0}, {0.25, 0.1}}),
      fir_coupling(0, 4, {0.3, -0.2}, {{0.1, 0.2}, {1.0, 0.0}, {0.35, 0.0}}),
      fir_coupling(0, 5, {0.35, 0.15}, {{0.3, 0.1}, {1.0, 0.0}, {0.1, -0.2}}),
  };
  add_background(sc);
  return sc;
}

// Both sources reach the detectors along the same path (one gain pattern, up to
// a common factor) but reach the primary coil through different kernels, so no
// single response fits the whole scan.
inline EmiScenario switching()
{
  auto sc = base_scenario("switching");
  auto a = sm_source();
  a.schedule.intervals = {{0, 44, true}};
  auto b = bb_source();
  b.schedule.intervals = {{56, lines - 1, true}};
  sc.sources = {a, b};
  sc.noise_sigma = {0.0};
  const cplx pattern[5] = {{1.0, 0.2}, {0.6, -0.3}, {0.3, 0.1}, {0.8, 0.4}, {0.2, -0.1}};
  sc.coupling.entries = {
      fir_coupling(0, 0, {1.0, 0.0}, {{0.15, 0.05}, {1.0, 0.0}, {0.25, -0.1}}),
      fir_coupling(1, 0, {-0.7, 0.6}, {{0.4, 0.0}, {-0.3, 0.2}, {1.0, 0.0}, {0.2, 0.1}, {0.1, 0.0}}),
  };
  for (int d = 0; d < 5; ++d) {
    sc.coupling.entries.push_back(scalar_coupling(0, d + 1, pattern[d]));
    sc.coupling.entries.push_back(scalar_coupling(1, d + 1, cplx{0.9, 0.3} * pattern[d]));
  }
  return sc;
}

inline EmiScenario sweep()
{
  auto sc = base_scenario("sweep");
  sc.sources = {bb_source()};
  sc.coupling.entries = {
      fir_coupling(0, 0, {1.0, 0.0}, {{0.35, 0.1}, {-0.5, 0.2}, {1.0, 0.0}, {0.45, -0.3}, {-0.3, 0.15}}),
      scalar_coupling(0, 1, {0.4, 0.1}),
      scalar_coupling(0, 2, {0.3, -0.2}),
      scalar_coupling(0, 3, {1.2, 0.2}),
      scalar_coupling(0, 4, {0.35, -0.25}),
      scalar_coupling(0, 5, {0.5, 0.15}),
  };
  add_background(sc);
  return sc;
}

inline EmiScenario inmodel()
{
  auto sc = base_scenario("inmodel");
  sc.noise_sigma = {0.0};
  sc.decorrelate_signal = true;
  const int bins[5] = {7, 23, 50, 78, 94};
  for (int s = 0; s < 5; ++s) {
    EmiSource src;
    src.name = "periodic" + std::to_string(s);
    src.kind = SourceKind::broadband;
    src.amplitude = emi_rms;
    src.bandwidth = 1.0;
    src.periodic = true;
    src.line_bin = bins[s];
    src.seed = static_cast<std::uint64_t>(11 + s);
    sc.sources.push_back(src);
  }
  // scalar detector couplings with a well-conditioned 5×5 mixing matrix
  const double g[5][5] = {{1.0, 0.3, -0.2, 0.1, 0.4},
                          {0.2, 1.1, 0.3, -0.3, 0.1},
                          {-0.1, 0.2, 0.9, 0.4, -0.2},
                          {0.3, -0.2, 0.1, 1.2, 0.3},
                          {0.1, 0.4, -0.3, 0.2, 1.0}};
  for (int s = 0; s < 5; ++s) {
    for (int d = 0; d < 5; ++d)
      sc.coupling.entries.push_back(scalar_coupling(s, d + 1, {g[s][d], 0.1 * (s - d)}));
    std::vector<cplx> taps;
    for (int t = 0; t < 7; ++t)
      taps.push_back({std::cos(0.9 * (s + 1) * t) / (1.0 + std::abs(t - 3)), std::sin(0.6 * (s + 2) * t) / (2.0 + t)});
    sc.coupling.entries.push_back(fir_coupling(s, 0, {1.0, 0.0}, taps));
  }
  return sc;
}

inline EmiScenario volume()
{
  auto sc = base_scenario("volume");
  sc.readout_samples = 128;
  sc.pe_lines = 97;
  sc.partitions = 23;
  sc.detectors = 2;
  sc.phantom = brain_slice(0.3);
  sc.roi = RoiSpec{0, 15, 0, 15};
  auto tone = fg_source();
  auto noise = bb_source();
  sc.sources = {tone, noise};
  sc.coupling.entries = {
      fir_coupling(0, 0, {1.0, 0.0}, {{0.2, 0.1}, {1.0, 0.0}, {0.2, -0.1}}),
      scalar_coupling(0, 1, {0.6, 0.1}),
      scalar_coupling(0, 2, {1.1, -0.3}),
      fir_coupling(1, 0, {0.7, 0.2}, {{0.1, 0.0}, {1.0, 0.0}, {0.3, 0.1}}),
      scalar_coupling(1, 1, {0.3, 0.2}),
      scalar_coupling(1, 2, {1.0, 0.0}),
  };
  return sc;
}

inline std::vector<std::string> names()
{
  return {"fg", "fg20", "sm", "bb", "switching", "sweep", "inmodel", "volume"};
}

inline EmiScenario by_name(const std::string& name)
{
  if (name == "fg")
    return fg();
  if (name == "fg20")
    return fg20();
  if (name == "sm")
    return sm();
  if (name == "bb")
    return bb();
  if (name == "switching")
    return switching();
  if (name == "sweep")
    return sweep();
  if (name == "inmodel")
    return inmodel();
  if (name == "volume")
    return volume();
  fail(ErrorKind::invalid_argument, "unknown preset '" + name + "'");
}

} // namespace editer::presets
