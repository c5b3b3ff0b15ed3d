#pragma once

// Field snapshots.
//
// CSV:    optional "# phi42-field L=<L> N=<N> M=<M>" comment, then the header
//         "k1,k2,re,im" and one row per mode, %.17g formatting.
// Binary: 16-byte header { char magic[8] = "PHI42FLD"; uint32 N; uint32 M },
//         then little-endian float64 payload: L, then (re, im) per mode in
//         row-major (k1, k2) order from -N to N.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "phi42/spectral.hpp"

namespace phi42 {

inline constexpr char kFieldMagic[8] = {'P', 'H', 'I', '4', '2', 'F', 'L', 'D'};

inline void write_field_csv(std::ostream& os, const SpectralField& f) {
  const TorusGrid& g = f.grid();
  char buf[160];
  std::snprintf(buf, sizeof buf, "# phi42-field L=%.17g N=%d M=%d\n", g.length(), g.cutoff(),
                g.resolution());
  os << buf << "k1,k2,re,im\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Mode k = g.mode(i);
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", k.k1, k.k2, f[i].real(), f[i].imag());
    os << buf;
  }
}

inline void write_field_csv(const std::string& path, const SpectralField& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_field_csv(os, f);
}

/// Reads a CSV snapshot. The grid comes from the comment line when present;
/// otherwise `length` must be given and N is inferred from the largest |k|.
inline SpectralField read_field_csv(std::istream& is, double length = 0.0, int resolution = 0) {
  std::string line;
  int cutoff = -1;
  struct Row {
    int k1, k2;
    double re, im;
  };
  std::vector<Row> rows;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      double l = 0.0;
      int n = 0, m = 0;
      if (std::sscanf(line.c_str(), "# phi42-field L=%lf N=%d M=%d", &l, &n, &m) == 3) {
        if (length == 0.0) length = l;
        if (resolution == 0) resolution = m;
        cutoff = n;
      }
      continue;
    }
    if (!header_seen) {
      if (line.rfind("k1,k2,re,im", 0) != 0) {
        throw ValidationError("field CSV line " + std::to_string(lineno) +
                              ": expected header k1,k2,re,im");
      }
      header_seen = true;
      continue;
    }
    Row r{};
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &r.k1, &r.k2, &r.re, &r.im) != 4) {
      throw ValidationError("field CSV line " + std::to_string(lineno) + ": malformed row");
    }
    rows.push_back(r);
  }
  require(length > 0.0, "field CSV has no L; pass the torus length explicitly");
  if (cutoff < 0) {
    cutoff = 0;
    for (const Row& r : rows) cutoff = std::max(cutoff, sup_norm({r.k1, r.k2}));
  }
  SpectralField f(TorusGrid(length, cutoff, resolution));
  for (const Row& r : rows) {
    if (!f.grid().contains({r.k1, r.k2})) {
      throw ValidationError("field CSV mode outside the declared cutoff");
    }
    f.at({r.k1, r.k2}) = Complex{r.re, r.im};
  }
  return f;
}

inline SpectralField read_field_csv(const std::string& path, double length = 0.0) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open " + path);
  return read_field_csv(is, length);
}

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  os.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T get_le(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!is) throw ValidationError("truncated binary field snapshot");
  return value;
}

}  // namespace detail

inline void write_field_binary(std::ostream& os, const SpectralField& f) {
  os.write(kFieldMagic, sizeof kFieldMagic);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(f.grid().cutoff()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(f.grid().resolution()));
  detail::put_le<double>(os, f.grid().length());
  for (const Complex& c : f.coeffs()) {
    detail::put_le<double>(os, c.real());
    detail::put_le<double>(os, c.imag());
  }
}

inline SpectralField read_field_binary(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kFieldMagic, sizeof magic) != 0) {
    throw ValidationError("not a phi42 binary field snapshot");
  }
  const auto n = detail::get_le<std::uint32_t>(is);
  const auto m = detail::get_le<std::uint32_t>(is);
  const auto l = detail::get_le<double>(is);
  SpectralField f(TorusGrid(l, static_cast<int>(n), static_cast<int>(m)));
  for (Complex& c : f.coeffs()) {
    const double re = detail::get_le<double>(is);
    const double im = detail::get_le<double>(is);
    c = Complex{re, im};
  }
  return f;
}

/// Reads either format, chosen by the magic bytes.
inline SpectralField read_field(const std::string& path, double length = 0.0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path);
  char magic[8] = {};
  is.read(magic, sizeof magic);
  is.clear();
  is.seekg(0);
  if (std::memcmp(magic, kFieldMagic, sizeof magic) == 0) return read_field_binary(is);
  return read_field_csv(is, length);
}

}  // namespace phi42
