#pragma once

// Synthetic acquisitions with known ground truth: an analytic phantom plus
// multi-channel EMI from scheduled sources seen through per-channel FIR
// couplings.
//
// Channel 0 is the primary coil, channels 1..N_c are the detectors. Each
// source produces a base waveform per PE line (tones, or band-limited complex
// noise); a channel's EMI is the sum over sources of gain · (masked base ⊛
// kernel) plus that channel's thermal noise. Detectors never see the phantom.
//
// Phantom coordinates are in pixels relative to the image center, x along
// the readout (rows) and y along the phase encode (columns).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "editer/kspace.hpp"
#include "editer/metrics.hpp"
#include "editer/rng.hpp"

namespace editer {

enum class SourceKind { single_tone, multi_tone, broadband };

enum class LinePhase {
  continuous, // tone phase runs on across lines, line starts `line_period` samples apart
  random,     // fresh uniform phase per line and tone
};

struct Tone {
  double offset = 0.0; // fraction of the readout bandwidth, in [-0.5, 0.5)
  double amplitude = 0.0;
  double phase = 0.0; // radians
};

struct ScheduleInterval {
  Index start = 0; // inclusive
  Index end = 0;   // inclusive
  bool on = true;
};

/// Listed intervals (sorted, non-overlapping, inclusive) set the state of the
/// lines they cover. Uncovered lines are off when any interval is an "on"
/// interval, and on otherwise; an empty schedule means always on.
struct SourceSchedule {
  std::vector<ScheduleInterval> intervals;

  bool is_on(Index line) const
  {
    for (const auto& iv : intervals)
      if (line >= iv.start && line <= iv.end)
        return iv.on;
    return intervals.empty() || std::all_of(intervals.begin(), intervals.end(), [](const auto& iv) { return !iv.on; });
  }
};

struct EmiSource {
  std::string name;
  SourceKind kind = SourceKind::single_tone;
  std::vector<Tone> tones;
  LinePhase line_phase = LinePhase::continuous;
  double line_period = 0.0; // samples between line starts; 0 means N_kx

  double amplitude = 0.0; // broadband RMS per sample
  double bandwidth = 1.0; // broadband occupied fraction of the readout band, (0, 1]
  double center = 0.0;    // broadband band center offset
  bool periodic = false;  // broadband: one waveform repeated on every line
  int line_bin = 0;       // periodic broadband: per-line phase advance 2π·bin/N_PE

  std::uint64_t seed = 0;
  SourceSchedule schedule;
};

/// FIR coupling from one source into one channel: taps(dy + hy, dx + hx), times gain.
struct CouplingKernel {
  int source = 0;
  int channel = 0;
  cplx gain{1.0, 0.0};
  WindowSpec support{1, 1};
  CMatrix taps = CMatrix::Ones(1, 1);
};

struct CouplingModel {
  std::vector<CouplingKernel> entries;
};

enum class ShapeKind { ellipse, rectangle };

struct Shape {
  ShapeKind kind = ShapeKind::ellipse;
  double center_x = 0.0;
  double center_y = 0.0;
  double half_x = 0.0; // semi-axis or half-width along x before rotation
  double half_y = 0.0;
  double angle_deg = 0.0;
  double intensity = 1.0;
};

struct EmiScenario {
  std::string id;
  Index readout_samples = 0;
  Index pe_lines = 0;
  int detectors = 0;
  int partitions = 1;
  std::uint64_t seed = 0;
  std::vector<Shape> phantom;
  std::vector<EmiSource> sources;
  CouplingModel coupling;
  std::vector<double> noise_sigma; // one per channel, or a single value for all
  bool decorrelate_signal = false; // project separable EMI line modes out of the ground truth
  std::optional<RoiSpec> roi;      // suggested object-free region for metric 2

  int channel_count() const { return detectors + 1; }

  double sigma(int channel) const
  {
    if (noise_sigma.empty())
      return 0.0;
    if (noise_sigma.size() == 1)
      return noise_sigma.front();
    return noise_sigma[static_cast<std::size_t>(channel)];
  }
};

inline ValidationReport validate_scenario(const EmiScenario& sc)
{
  ValidationReport rep;
  auto bad = [&](const std::string& m) { rep.violations.push_back(m); };
  if (sc.readout_samples < 1 || sc.pe_lines < 1)
    bad("matrix dims must be positive");
  if (sc.detectors < 1)
    bad("scenario needs at least one detector");
  if (sc.partitions < 1)
    bad("partitions must be ≥ 1");
  if (sc.phantom.empty())
    bad("phantom needs at least one shape");
  if (!sc.noise_sigma.empty() && sc.noise_sigma.size() != 1 &&
      sc.noise_sigma.size() != static_cast<std::size_t>(sc.channel_count()))
    bad("noise_sigma must have 1 or N_c + 1 entries");
  for (double s : sc.noise_sigma)
    if (!(s >= 0.0))
      bad("noise_sigma entries must be ≥ 0");

  for (std::size_t s = 0; s < sc.sources.size(); ++s) {
    const auto& src = sc.sources[s];
    const std::string tag = "source " + std::to_string(s) + ": ";
    if (src.kind == SourceKind::broadband) {
      if (!(src.amplitude >= 0.0))
        bad(tag + "amplitude must be ≥ 0");
      if (!(src.bandwidth > 0.0 && src.bandwidth <= 1.0))
        bad(tag + "bandwidth must lie in (0, 1]");
    } else {
      if (src.tones.empty())
        bad(tag + "tone source without tones");
      if (src.kind == SourceKind::single_tone && src.tones.size() != 1)
        bad(tag + "single_tone source must have exactly one tone");
    }
    for (const auto& t : src.tones) {
      if (!(t.amplitude >= 0.0))
        bad(tag + "tone amplitude must be ≥ 0");
      if (!(t.offset >= -0.5 && t.offset < 0.5))
        bad(tag + "tone offset must lie in [-0.5, 0.5)");
    }
    Index prev_end = -1;
    for (const auto& iv : src.schedule.intervals) {
      if (iv.start < 0 || iv.end >= sc.pe_lines || iv.end < iv.start)
        bad(tag + "schedule interval outside [0, N_PE)");
      if (iv.start <= prev_end)
        bad(tag + "schedule intervals must be sorted and non-overlapping");
      prev_end = iv.end;
    }
  }
  for (const auto& k : sc.coupling.entries) {
    if (k.source < 0 || k.source >= static_cast<int>(sc.sources.size()))
      bad("coupling references unknown source " + std::to_string(k.source));
    if (k.channel < 0 || k.channel >= sc.channel_count())
      bad("coupling references unknown channel " + std::to_string(k.channel));
    if (k.support.dkx < 1 || k.support.dky < 1 || k.support.dkx % 2 == 0 || k.support.dky % 2 == 0)
      bad("coupling support must be odd and positive");
    if (k.taps.rows() != k.support.dky || k.taps.cols() != k.support.dkx)
      bad("coupling kernel taps do not match declared support");
    if (k.support.dkx > sc.readout_samples || k.support.dky > sc.pe_lines)
      bad("coupling support exceeds matrix dims");
  }
  return rep;
}

inline void require_valid(const EmiScenario& sc)
{
  const auto rep = validate_scenario(sc);
  if (!rep.valid())
    fail(ErrorKind::validation, "invalid scenario: " + rep.summary());
}

namespace detail {

inline double sinc(double x)
{
  if (std::abs(x) < 1e-12)
    return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// 2 J1(2πq) / (2πq), with the limit 1 at q = 0.
inline double jinc(double q)
{
  const double z = 2.0 * std::numbers::pi * q;
  if (std::abs(z) < 1e-8)
    return 1.0;
  return 2.0 * std::cyl_bessel_j(1.0, z) / z;
}

} // namespace detail

/// Continuous Fourier transform of one shape at spatial frequency (u, v) in cycles/pixel.
inline cplx shape_transform(const Shape& s, double u, double v)
{
  const double th = s.angle_deg * std::numbers::pi / 180.0;
  const double ur = u * std::cos(th) + v * std::sin(th);
  const double vr = -u * std::sin(th) + v * std::cos(th);
  double mag = 0.0;
  if (s.kind == ShapeKind::ellipse) {
    const double q = std::hypot(s.half_x * ur, s.half_y * vr);
    mag = s.intensity * std::numbers::pi * s.half_x * s.half_y * detail::jinc(q);
  } else {
    mag = s.intensity * 4.0 * s.half_x * s.half_y * detail::sinc(2.0 * s.half_x * ur) * detail::sinc(2.0 * s.half_y * vr);
  }
  const double ph = -2.0 * std::numbers::pi * (u * s.center_x + v * s.center_y);
  return mag * cplx(std::cos(ph), std::sin(ph));
}

/// Analytic k-space of the shape sum on the centered Cartesian grid, scaled so
/// that reconstruct() returns the shapes at their nominal intensity.
inline CMatrix phantom_kspace(const std::vector<Shape>& shapes, Index nkx, Index npe)
{
  if (shapes.empty())
    fail(ErrorKind::invalid_argument, "phantom_kspace: no shapes");
  if (nkx < 1 || npe < 1)
    fail(ErrorKind::invalid_argument, "phantom_kspace: empty matrix");
  for (const auto& s : shapes)
    if (!(s.half_x > 0.0 && s.half_y > 0.0))
      fail(ErrorKind::invalid_argument, "phantom_kspace: degenerate shape (zero area)");

  const double norm = 1.0 / std::sqrt(static_cast<double>(nkx * npe));
  CMatrix k(nkx, npe);
  for (Index c = 0; c < npe; ++c) {
    const double v = static_cast<double>(c - npe / 2) / static_cast<double>(npe);
    for (Index r = 0; r < nkx; ++r) {
      const double u = static_cast<double>(r - nkx / 2) / static_cast<double>(nkx);
      cplx sum{0.0, 0.0};
      for (const auto& s : shapes)
        sum += shape_transform(s, u, v);
      k(r, c) = sum * norm;
    }
  }
  return k;
}

/// Zero-padded 2D convolution: out(kx, l) = Σ taps(dy, dx) · in(kx − dx, l − dy).
inline CMatrix convolve_kernel(const CMatrix& in, const CMatrix& taps)
{
  const int hy = static_cast<int>(taps.rows() - 1) / 2;
  const int hx = static_cast<int>(taps.cols() - 1) / 2;
  const Index nkx = in.rows();
  const Index npe = in.cols();
  CMatrix out = CMatrix::Zero(nkx, npe);
  for (int dy = -hy; dy <= hy; ++dy) {
    for (int dx = -hx; dx <= hx; ++dx) {
      const cplx t = taps(dy + hy, dx + hx);
      if (t == cplx{0.0, 0.0})
        continue;
      const Index kx_begin = std::max<Index>(0, dx);
      const Index kx_end = std::min<Index>(nkx, nkx + dx);
      if (kx_end <= kx_begin)
        continue;
      for (Index l = 0; l < npe; ++l) {
        const Index src = l - dy;
        if (src < 0 || src >= npe)
          continue;
        out.col(l).segment(kx_begin, kx_end - kx_begin) += t * in.col(src).segment(kx_begin - dx, kx_end - kx_begin);
      }
    }
  }
  return out;
}

namespace detail {

inline std::uint64_t source_lane(const EmiSource& src) { return src.seed; }

inline CVector bandlimited_noise(CounterRng& rng, Index n, double amplitude, double bandwidth, double center,
                                 Eigen::FFT<double>& fft)
{
  std::vector<cplx> white(static_cast<std::size_t>(n));
  for (auto& v : white) {
    const double re = rng.normal();
    const double im = rng.normal();
    v = cplx(re, im) * std::sqrt(0.5);
  }
  std::vector<cplx> spec;
  fft.fwd(spec, white);
  Index kept = 0;
  for (Index b = 0; b < n; ++b) {
    double f = static_cast<double>(b) / static_cast<double>(n);
    if (f >= 0.5)
      f -= 1.0;
    double d = std::abs(f - center);
    d = std::min(d, 1.0 - d);
    if (d <= 0.5 * bandwidth + 1e-12)
      ++kept;
    else
      spec[static_cast<std::size_t>(b)] = 0.0;
  }
  std::vector<cplx> out;
  fft.inv(out, spec);
  const double scale = kept > 0 ? amplitude / std::sqrt(static_cast<double>(kept) / static_cast<double>(n)) : 0.0;
  CVector v(n);
  for (Index i = 0; i < n; ++i)
    v(i) = out[static_cast<std::size_t>(i)] * scale;
  return v;
}

inline double line_period(const EmiSource& src, Index nkx)
{
  return src.line_period > 0.0 ? src.line_period : static_cast<double>(nkx);
}

} // namespace detail

/// Base waveform of one source for one partition (schedule applied), N_kx × N_PE.
inline CMatrix source_waveform(const EmiScenario& sc, std::size_t source, int partition = 0)
{
  const auto& src = sc.sources[source];
  const Index nkx = sc.readout_samples;
  const Index npe = sc.pe_lines;
  CMatrix base = CMatrix::Zero(nkx, npe);
  const double two_pi = 2.0 * std::numbers::pi;

  if (src.kind == SourceKind::broadband) {
    Eigen::FFT<double> fft;
    CounterRng rng(sc.seed, stream_id(StreamKind::source_waveform, static_cast<std::uint64_t>(partition), source),
                   detail::source_lane(src));
    if (src.periodic) {
      const CVector w = detail::bandlimited_noise(rng, nkx, src.amplitude, src.bandwidth, src.center, fft);
      for (Index l = 0; l < npe; ++l) {
        const double ph = two_pi * static_cast<double>(src.line_bin) * static_cast<double>(l) / static_cast<double>(npe);
        base.col(l) = w * cplx(std::cos(ph), std::sin(ph));
      }
    } else {
      for (Index l = 0; l < npe; ++l)
        base.col(l) = detail::bandlimited_noise(rng, nkx, src.amplitude, src.bandwidth, src.center, fft);
    }
  } else {
    CounterRng rng(sc.seed, stream_id(StreamKind::source_phase, static_cast<std::uint64_t>(partition), source),
                   detail::source_lane(src));
    const double period = detail::line_period(src, nkx);
    for (Index l = 0; l < npe; ++l) {
      for (const auto& t : src.tones) {
        double line_phase = t.phase;
        if (src.line_phase == LinePhase::random)
          line_phase += two_pi * rng.uniform();
        else
          line_phase += two_pi * t.offset * period * static_cast<double>(l);
        for (Index kx = 0; kx < nkx; ++kx) {
          const double ph = two_pi * t.offset * static_cast<double>(kx) + line_phase;
          base(kx, l) += t.amplitude * cplx(std::cos(ph), std::sin(ph));
        }
      }
    }
  }
  for (Index l = 0; l < npe; ++l)
    if (!src.schedule.is_on(l))
      base.col(l).setZero();
  return base;
}

/// Per-line modulation vectors (length N_PE) of the separable source components;
/// non-periodic broadband sources have none.
inline std::vector<CVector> source_line_modes(const EmiScenario& sc, int partition = 0)
{
  std::vector<CVector> modes;
  const Index nkx = sc.readout_samples;
  const Index npe = sc.pe_lines;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t s = 0; s < sc.sources.size(); ++s) {
    const auto& src = sc.sources[s];
    if (src.kind == SourceKind::broadband) {
      if (!src.periodic)
        continue;
      CVector v(npe);
      for (Index l = 0; l < npe; ++l) {
        const double ph = two_pi * static_cast<double>(src.line_bin) * static_cast<double>(l) / static_cast<double>(npe);
        v(l) = src.schedule.is_on(l) ? cplx(std::cos(ph), std::sin(ph)) : cplx{0.0, 0.0};
      }
      modes.push_back(v);
      continue;
    }
    CounterRng rng(sc.seed, stream_id(StreamKind::source_phase, static_cast<std::uint64_t>(partition), s),
                   detail::source_lane(src));
    const double period = detail::line_period(src, nkx);
    std::vector<CVector> tone_modes(src.tones.size(), CVector::Zero(npe));
    for (Index l = 0; l < npe; ++l) {
      for (std::size_t t = 0; t < src.tones.size(); ++t) {
        double ph = src.tones[t].phase;
        if (src.line_phase == LinePhase::random)
          ph += two_pi * rng.uniform();
        else
          ph += two_pi * src.tones[t].offset * period * static_cast<double>(l);
        if (src.schedule.is_on(l))
          tone_modes[t](l) = cplx(std::cos(ph), std::sin(ph));
      }
    }
    modes.insert(modes.end(), tone_modes.begin(), tone_modes.end());
  }
  return modes;
}

struct EmiChannels {
  std::vector<CMatrix> channels; // [0] primary EMI, [1..N_c] detectors; thermal noise included
};

inline EmiChannels synthesize_emi(const EmiScenario& sc, int partition = 0)
{
  require_valid(sc);
  const Index nkx = sc.readout_samples;
  const Index npe = sc.pe_lines;
  EmiChannels out;
  out.channels.assign(static_cast<std::size_t>(sc.channel_count()), CMatrix::Zero(nkx, npe));

  for (std::size_t s = 0; s < sc.sources.size(); ++s) {
    bool used = false;
    for (const auto& k : sc.coupling.entries)
      used = used || k.source == static_cast<int>(s);
    if (!used)
      continue;
    const CMatrix base = source_waveform(sc, s, partition);
    for (const auto& k : sc.coupling.entries)
      if (k.source == static_cast<int>(s))
        out.channels[static_cast<std::size_t>(k.channel)] += k.gain * convolve_kernel(base, k.taps);
  }

  for (int ch = 0; ch < sc.channel_count(); ++ch) {
    const double sigma = sc.sigma(ch);
    if (!(sigma > 0.0))
      continue;
    CounterRng rng(sc.seed, stream_id(StreamKind::thermal_noise, static_cast<std::uint64_t>(partition),
                                      static_cast<std::uint64_t>(ch)));
    auto& m = out.channels[static_cast<std::size_t>(ch)];
    const double scale = sigma * std::sqrt(0.5);
    for (Index l = 0; l < npe; ++l)
      for (Index kx = 0; kx < nkx; ++kx) {
        const double re = rng.normal();
        const double im = rng.normal();
        m(kx, l) += scale * cplx(re, im);
      }
  }
  return out;
}

/// Removes the span of `modes` from every readout row of `k` (rows viewed as vectors over PE lines).
inline CMatrix project_out_line_modes(const CMatrix& k, const std::vector<CVector>& modes)
{
  if (modes.empty())
    return k;
  CMatrix v(k.cols(), static_cast<Index>(modes.size()));
  for (std::size_t j = 0; j < modes.size(); ++j)
    v.col(static_cast<Index>(j)) = modes[j];
  Eigen::JacobiSVD<CMatrix> svd(v, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-10 * sv(0))
    ++rank;
  const CMatrix q = svd.matrixU().leftCols(rank);
  // rows r of k: x = k.row(r)^T; x ← x − Q Qᴴ x, i.e. K ← K − K conj(Q) Qᵀ
  return k - (k * q.conjugate()) * q.transpose();
}

/// primary = phantom + primary EMI (with its thermal noise); ground truth = noise-free phantom.
inline AcquisitionDataset assemble_dataset(const EmiScenario& sc, int partition = 0)
{
  require_valid(sc);
  CMatrix clean = phantom_kspace(sc.phantom, sc.readout_samples, sc.pe_lines);
  if (sc.decorrelate_signal)
    clean = project_out_line_modes(clean, source_line_modes(sc, partition));
  auto emi = synthesize_emi(sc, partition);

  AcquisitionDataset ds;
  ds.primary = clean + emi.channels[0];
  ds.detectors.assign(emi.channels.begin() + 1, emi.channels.end());
  ds.ground_truth = std::move(clean);
  if (sc.partitions > 1)
    ds.partition_index = partition;
  return ds;
}

inline VolumeDataset assemble_volume(const EmiScenario& sc)
{
  VolumeDataset vol;
  for (int p = 0; p < sc.partitions; ++p) {
    vol.partitions.push_back(assemble_dataset(sc, p));
    vol.partitions.back().partition_index = p;
  }
  if (sc.partitions == 1)
    vol.partitions.front().partition_index.reset();
  return vol;
}

} // namespace editer
