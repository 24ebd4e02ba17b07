#include "fexgan/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "fexgan/errors.hpp"

namespace fs = std::filesystem;

namespace fexgan {

namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv(double h, double s, double v) {
  h = (h - std::floor(h)) * 6.0;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

Rgb lerp(Rgb a, Rgb b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

Rgb scale(Rgb c, double k) { return {c.r * k, c.g * k, c.b * k}; }

Rgb rgb255(double r, double g, double b) { return {r / 255.0, g / 255.0, b / 255.0}; }

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

// Normalised geometry shared by the renderer and the region report.
constexpr double kFaceRy = 0.36;
constexpr double kEyeDy = -0.07;
constexpr double kEyeRx = 0.065;
constexpr double kEyeRyMin = 0.008;
constexpr double kEyeRyGain = 0.05;
constexpr double kBrowDy = -0.09;
constexpr double kBrowHalfLen = 0.06;
constexpr double kMaxBrowAngle = 0.6;
constexpr double kMouthDy = 0.18;
constexpr double kMouthHalfW = 0.13;
constexpr double kMouthBend = 0.05;
constexpr double kLipHalf = 0.012;
constexpr double kMouthOpenGain = 0.09;
constexpr double kJitter = 0.015;

struct Layout {
  double cx, cy, rx, ry;
  std::array<double, 2> eye_x;
  double eye_y;
};

Layout layout(const IdentityParams& id, std::uint64_t jitter_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(jitter_seed),
                    static_cast<std::uint32_t>(jitter_seed >> 32), 1u};
  Rng rng(seq);
  std::uniform_real_distribution<double> u(-kJitter, kJitter);
  Layout l{};
  l.cx = 0.5 + u(rng);
  l.cy = 0.52 + u(rng);
  l.ry = kFaceRy;
  l.rx = kFaceRy / id.face_aspect;
  const double dx = id.eye_spacing * l.rx;
  l.eye_x = {l.cx - dx, l.cx + dx};
  l.eye_y = l.cy + kEyeDy;
  return l;
}

Box to_pixels(double x0, double y0, double x1, double y1, int size) {
  auto lo = [size](double v) { return std::clamp(static_cast<int>(std::floor(v * size)) - 1, 0, size); };
  auto hi = [size](double v) { return std::clamp(static_cast<int>(std::ceil(v * size)) + 1, 0, size); };
  return {lo(x0), lo(y0), hi(x1), hi(y1)};
}

void check_range(double v, double lo, double hi, const char* name) {
  if (!std::isfinite(v) || v < lo || v > hi) {
    throw DomainError(std::string(name) + " = " + std::to_string(v) + " outside [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

std::uint64_t mix(std::initializer_list<std::uint32_t> words) {
  std::seed_seq seq(words);
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && !s.empty();
}

std::vector<fs::directory_entry> sorted_entries(const fs::path& dir) {
  std::vector<fs::directory_entry> out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.path().filename() < b.path().filename(); });
  return out;
}

}  // namespace

void IdentityParams::validate() const {
  if (identity_id < 0) throw DomainError("identity_id must be >= 0");
  check_range(face_hue, 0.0, 1.0, "face_hue");
  check_range(skin_tone, 0.0, 1.0, "skin_tone");
  check_range(face_aspect, 0.85, 1.2, "face_aspect");
  check_range(eye_spacing, 0.32, 0.48, "eye_spacing");
  check_range(brow_thickness, 0.015, 0.035, "brow_thickness");
}

IdentityParams IdentityParams::derive(std::uint64_t corpus_seed, int identity_id) {
  if (identity_id < 0) throw DomainError("identity_id must be >= 0");
  const auto lo = static_cast<std::uint32_t>(corpus_seed);
  const auto hi = static_cast<std::uint32_t>(corpus_seed >> 32);
  Rng base(mix({lo, hi, 0xface0u}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double hue0 = unit(base);

  Rng rng(mix({lo, hi, 0xface1u, static_cast<std::uint32_t>(identity_id)}));
  IdentityParams p;
  p.identity_id = identity_id;
  const double h = hue0 + 0.6180339887498949 * identity_id;
  p.face_hue = h - std::floor(h);
  p.skin_tone = unit(rng);
  p.face_aspect = 0.85 + 0.35 * unit(rng);
  p.eye_spacing = 0.32 + 0.16 * unit(rng);
  p.brow_thickness = 0.015 + 0.02 * unit(rng);
  return p;
}

void ExpressionParams::validate() const {
  check_range(brow_angle, -kMaxBrowAngle, kMaxBrowAngle, "brow_angle");
  check_range(mouth_curvature, -1.0, 1.0, "mouth_curvature");
  check_range(eye_openness, 0.0, 1.0, "eye_openness");
  check_range(mouth_openness, 0.0, 1.0, "mouth_openness");
}

ExpressionParams ExpressionParams::rest() { return {0.0, 0.0, 0.5, 0.0}; }

ExpressionParams ExpressionParams::for_affect(Affect a, double intensity) {
  check_range(intensity, 0.0, 1.0, "intensity");
  const ExpressionParams r = rest();
  ExpressionParams full = r;
  switch (a) {
    case Affect::neutral: return r;
    case Affect::joy: full = {-0.05, 0.8, 0.4, 0.25}; break;
    case Affect::sadness: full = {-0.4, -0.7, 0.35, 0.0}; break;
    case Affect::anger: full = {0.5, -0.25, 0.5, 0.0}; break;
    case Affect::disgust: full = {0.15, -0.55, 0.12, 0.2}; break;
    case Affect::fear: full = {-0.3, -0.15, 0.85, 0.45}; break;
    case Affect::surprise: full = {-0.15, 0.0, 1.0, 0.8}; break;
    default: throw DomainError("invalid affect");
  }
  auto mixv = [intensity](double from, double to) { return from + intensity * (to - from); };
  ExpressionParams e{mixv(r.brow_angle, full.brow_angle), mixv(r.mouth_curvature, full.mouth_curvature),
                     mixv(r.eye_openness, full.eye_openness),
                     mixv(r.mouth_openness, full.mouth_openness)};
  if (a == Affect::surprise) e.eye_openness = 1.0;
  return e;
}

bool FaceRegions::contains(int x, int y) const {
  return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(x, y); });
}

FaceRegions expression_regions(const IdentityParams& identity, std::uint64_t jitter_seed,
                               int size) {
  identity.validate();
  const Layout l = layout(identity, jitter_seed);
  FaceRegions out;
  const double eye_ry = kEyeRyMin + kEyeRyGain;
  const double brow_y = l.eye_y + kBrowDy;
  const double brow_dx = kBrowHalfLen + identity.brow_thickness;
  const double brow_dy = kBrowHalfLen * std::sin(kMaxBrowAngle) + identity.brow_thickness;
  for (double ex : l.eye_x) {
    out.boxes.push_back(to_pixels(ex - kEyeRx, l.eye_y - eye_ry, ex + kEyeRx, l.eye_y + eye_ry, size));
    out.boxes.push_back(to_pixels(ex - brow_dx, brow_y - brow_dy, ex + brow_dx, brow_y + brow_dy, size));
  }
  const double my = l.cy + kMouthDy;
  out.boxes.push_back(to_pixels(l.cx - kMouthHalfW - kLipHalf, my - 0.5 * kMouthBend - kLipHalf,
                                l.cx + kMouthHalfW + kLipHalf,
                                my + 0.5 * kMouthBend + kMouthOpenGain + kLipHalf, size));
  return out;
}

Image render_face(const IdentityParams& identity, const ExpressionParams& expr,
                  std::uint64_t jitter_seed, int size) {
  identity.validate();
  expr.validate();
  if (size < 8) throw DomainError("render size must be >= 8");
  const Layout l = layout(identity, jitter_seed);

  const Rgb background = rgb255(196, 202, 210);
  const Rgb skin = lerp(rgb255(242, 208, 182), rgb255(128, 86, 62), identity.skin_tone);
  const Rgb hair = hsv(identity.face_hue, 0.7, 0.6);
  const Rgb brow = scale(hair, 0.55);
  const Rgb nose = scale(skin, 0.88);
  const Rgb sclera = rgb255(250, 250, 250);
  const Rgb pupil = hsv(identity.face_hue + 0.5, 0.5, 0.25);
  const Rgb lip = rgb255(150, 60, 70);
  const Rgb mouth_inside = rgb255(60, 15, 25);

  const double eye_ry = kEyeRyMin + kEyeRyGain * expr.eye_openness;
  const double pupil_r = 0.026;
  const double brow_y = l.eye_y + kBrowDy;
  const double brow_half_t = 0.5 * identity.brow_thickness;
  const double my = l.cy + kMouthDy;
  const double open_depth = kMouthOpenGain * expr.mouth_openness;

  auto shade = [&](double x, double y) -> Rgb {
    Rgb c = background;
    const bool in_face = in_ellipse(x, y, l.cx, l.cy, l.rx, l.ry);
    if (in_ellipse(x, y, l.cx, l.cy - 0.02, l.rx + 0.04, l.ry + 0.05) && y < l.cy + 0.05 &&
        (!in_face || y < l.cy - 0.05)) {
      c = hair;
    }
    if (!in_face) return c;
    c = skin;
    if (y < l.cy - 0.22) c = hair;
    if (in_ellipse(x, y, l.cx, l.cy + 0.06, 0.025, 0.04)) c = nose;

    for (int side = 0; side < 2; ++side) {
      const double ex = l.eye_x[side];
      if (in_ellipse(x, y, ex, l.eye_y, kEyeRx, eye_ry)) {
        c = in_ellipse(x, y, ex, l.eye_y, pupil_r, pupil_r) ? pupil : sclera;
      }
      // Left brow rotates by +angle, right by -angle, so positive angles
      // lower both inner ends.
      const double ang = side == 0 ? expr.brow_angle : -expr.brow_angle;
      const double dx = x - ex, dy = y - brow_y;
      const double along = dx * std::cos(ang) + dy * std::sin(ang);
      const double across = -dx * std::sin(ang) + dy * std::cos(ang);
      if (std::abs(along) <= kBrowHalfLen && std::abs(across) <= brow_half_t) c = brow;
    }

    const double t = (x - l.cx) / kMouthHalfW;
    if (std::abs(t) <= 1.0) {
      const double line = my + kMouthBend * expr.mouth_curvature * (0.5 - t * t);
      const double bottom = line + open_depth * std::sqrt(1.0 - t * t);
      if (y >= line && y <= bottom) c = mouth_inside;
      if (std::abs(y - line) <= kLipHalf) c = lip;
    }
    return c;
  };

  constexpr int kSuper = 3;
  Image img(size, size);
  for (int py = 0; py < size; ++py) {
    for (int px = 0; px < size; ++px) {
      double r = 0, g = 0, b = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double x = (px + (sx + 0.5) / kSuper) / size;
          const double y = (py + (sy + 0.5) / kSuper) / size;
          const Rgb c = shade(x, y);
          r += c.r;
          g += c.g;
          b += c.b;
        }
      }
      constexpr double kNorm = 255.0 / (kSuper * kSuper);
      std::uint8_t* p = img.at(px, py);
      p[0] = static_cast<std::uint8_t>(std::lround(std::clamp(r * kNorm, 0.0, 255.0)));
      p[1] = static_cast<std::uint8_t>(std::lround(std::clamp(g * kNorm, 0.0, 255.0)));
      p[2] = static_cast<std::uint8_t>(std::lround(std::clamp(b * kNorm, 0.0, 255.0)));
    }
  }
  return img;
}

void CorpusSpec::validate() const {
  if (n_identities < 1) throw DomainError("n_identities must be >= 1");
  if (frames_per_pair < 1) throw DomainError("frames_per_pair must be >= 1");
  if (frames_per_pair > 99999) throw DomainError("frames_per_pair exceeds 5-digit file names");
  if (image_size < 32 || (image_size & (image_size - 1)) != 0) {
    throw DomainError("image_size must be a power of two >= 32, got " + std::to_string(image_size));
  }
}

std::string record_path(int identity_id, Affect a, int frame_index) {
  char frame[16];
  std::snprintf(frame, sizeof frame, "%05d.png", frame_index);
  return std::to_string(identity_id) + "/" + std::string(affect_name(a)) + "/" + frame;
}

std::uint64_t record_seed(std::uint64_t corpus_seed, int identity_id, Affect a, int frame_index) {
  return mix({static_cast<std::uint32_t>(corpus_seed), static_cast<std::uint32_t>(corpus_seed >> 32),
              static_cast<std::uint32_t>(identity_id), static_cast<std::uint32_t>(affect_id(a)),
              static_cast<std::uint32_t>(frame_index)});
}

ExpressionParams frame_expression(std::uint64_t corpus_seed, int identity_id, Affect a,
                                  int frame_index) {
  const std::uint64_t s = record_seed(corpus_seed, identity_id, a, frame_index);
  Rng rng(mix({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32), 2u}));
  std::uniform_real_distribution<double> u(0.75, 1.0);
  return ExpressionParams::for_affect(a, u(rng));
}

CorpusManifest plan_corpus(const CorpusSpec& spec) {
  spec.validate();
  CorpusManifest m;
  m.records.reserve(spec.image_count());
  m.expressions.reserve(spec.image_count());
  for (int id = 0; id < spec.n_identities; ++id) {
    for (Affect a : kAllAffects) {
      for (int f = 0; f < spec.frames_per_pair; ++f) {
        m.records.push_back({id, a, f, record_path(id, a, f)});
        m.expressions.push_back(frame_expression(spec.corpus_seed, id, a, f));
      }
    }
  }
  return m;
}

CorpusManifest gen_corpus(const CorpusSpec& spec, const fs::path& root, int workers) {
  CorpusManifest m = plan_corpus(spec);
  std::error_code ec;
  for (int id = 0; id < spec.n_identities; ++id) {
    for (Affect a : kAllAffects) {
      const fs::path dir = root / std::to_string(id) / std::string(affect_name(a));
      fs::create_directories(dir, ec);
      if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
  }
  std::vector<IdentityParams> identities;
  for (int id = 0; id < spec.n_identities; ++id) {
    identities.push_back(IdentityParams::derive(spec.corpus_seed, id));
  }

  const std::size_t n = m.records.size();
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      const auto& r = m.records[i];
      const auto seed = record_seed(spec.corpus_seed, r.identity_id, r.affect, r.frame_index);
      const Image img = render_face(identities[static_cast<std::size_t>(r.identity_id)],
                                    m.expressions[i], seed, spec.image_size);
      write_png(root / r.path, img);
    }
  };
  const int nw = std::max(1, workers);
  if (nw == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nw));
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(static_cast<std::size_t>(w), static_cast<std::size_t>(nw));
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
  write_manifest(root / kManifestName, m.records);
  return m;
}

void write_manifest(const fs::path& file, std::span<const SampleRecord> records) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  for (const auto& r : records) {
    out << r.identity_id << '\t' << affect_name(r.affect) << '\t' << r.frame_index << '\t' << r.path
        << '\n';
  }
  if (!out) throw IoError("write failed for " + file.string());
}

std::vector<SampleRecord> read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open manifest " + file.string());
  std::vector<SampleRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, affect, frame, path;
    if (!std::getline(ss, id, '\t') || !std::getline(ss, affect, '\t') ||
        !std::getline(ss, frame, '\t') || !std::getline(ss, path)) {
      throw IoError(file.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    SampleRecord r;
    if (!parse_int(id, r.identity_id) || !parse_int(frame, r.frame_index)) {
      throw IoError(file.string() + ":" + std::to_string(lineno) + ": bad integer field");
    }
    r.affect = affect_from_name(affect);
    r.path = path;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SampleRecord> load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("corpus root " + root.string() + " is not a directory");
  std::vector<SampleRecord> out;
  for (const auto& id_entry : sorted_entries(root)) {
    if (!id_entry.is_directory()) continue;  // manifest and other top-level files
    const std::string id_name = id_entry.path().filename().string();
    int identity = 0;
    if (!parse_int(id_name, identity) || identity < 0) {
      throw DomainError("identity directory '" + id_name + "' is not a non-negative integer");
    }
    for (const auto& affect_entry : sorted_entries(id_entry.path())) {
      const std::string affect_dir = affect_entry.path().filename().string();
      if (!affect_entry.is_directory()) {
        throw DomainError("unexpected file '" + affect_entry.path().string() + "' in identity directory");
      }
      Affect affect;
      try {
        affect = affect_from_name(affect_dir);
      } catch (const DomainError&) {
        throw DomainError("unknown affect directory '" + affect_dir + "' in " + id_entry.path().string());
      }
      for (const auto& file : sorted_entries(affect_entry.path())) {
        const auto fname = file.path().filename().string();
        int frame = 0;
        if (file.path().extension() != ".png" || fname.size() != 9 ||
            !parse_int(std::string_view(fname).substr(0, 5), frame)) {
          throw DomainError("unexpected file '" + file.path().string() + "' (want NNNNN.png)");
        }
        if (!has_png_signature(file.path())) {
          throw IoError("unreadable image " + file.path().string());
        }
        out.push_back({identity, affect, frame, record_path(identity, affect, frame)});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const SampleRecord& a, const SampleRecord& b) {
    return std::tie(a.identity_id, a.affect, a.frame_index) <
           std::tie(b.identity_id, b.affect, b.frame_index);
  });
  return out;
}

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split(
    std::span<const SampleRecord> records, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw DomainError("val_fraction must lie in (0, 1), got " + std::to_string(val_fraction));
  }
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    groups[{records[i].identity_id, affect_id(records[i].affect)}].push_back(i);
  }

  const auto total_val = static_cast<std::size_t>(std::llround(records.size() * val_fraction));
  struct Share {
    std::size_t count;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (const auto& [key, members] : groups) {
    const double exact = members.size() * val_fraction;
    const auto base = static_cast<std::size_t>(std::floor(exact));
    shares.push_back({base, exact - base});
    assigned += base;
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
  for (std::size_t k = 0; assigned < total_val && k < order.size(); ++k, ++assigned) {
    ++shares[order[k]].count;
  }

  std::vector<char> is_val(records.size(), 0);
  std::size_t g = 0;
  for (const auto& [key, members] : groups) {
    std::vector<std::size_t> shuffled = members;
    Rng rng(mix({static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                 static_cast<std::uint32_t>(key.first), static_cast<std::uint32_t>(key.second)}));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t k = 0; k < shares[g].count && k < shuffled.size(); ++k) is_val[shuffled[k]] = 1;
    ++g;
  }

  std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (is_val[i] ? out.second : out.first).push_back(records[i]);
  }
  return out;
}

const SampleRecord& sample_target(std::span<const SampleRecord> records, int identity_id, Affect a,
                                  Rng& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].identity_id == identity_id && records[i].affect == a) pool.push_back(i);
  }
  if (pool.empty()) {
    throw DomainError("no target image for identity " + std::to_string(identity_id) + ", affect " +
                      std::string(affect_name(a)));
  }
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return records[pool[pick(rng)]];
}

TargetIndex::TargetIndex(std::span<const SampleRecord> records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    pools_[{records[i].identity_id, affect_id(records[i].affect)}].push_back(i);
  }
}

std::size_t TargetIndex::draw(int identity_id, Affect a, Rng& rng) const {
  const auto it = pools_.find({identity_id, affect_id(a)});
  if (it == pools_.end()) {
    throw DomainError("no target image for identity " + std::to_string(identity_id) + ", affect " +
                      std::string(affect_name(a)));
  }
  std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
  return it->second[pick(rng)];
}

bool TargetIndex::has(int identity_id, Affect a) const {
  return pools_.count({identity_id, affect_id(a)}) != 0;
}

std::vector<int> TargetIndex::identities() const {
  std::vector<int> ids;
  for (const auto& [key, pool] : pools_) {
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  }
  return ids;
}

}  // namespace fexgan
