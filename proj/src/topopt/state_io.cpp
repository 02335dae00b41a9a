#include "hitop/topopt/state_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "hitop/common/error.hpp"
#include "hitop/common/image_io.hpp"

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace hitop::topopt {

namespace {

constexpr char kStateMagic[5] = {'H', 'T', 'O', 'P', '1'};
constexpr char kRminMagic[5] = {'H', 'R', 'M', 'N', '1'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <typename T>
  void put(T v) { raw(&v, sizeof v); }
  void doubles(const std::vector<double>& v) { raw(v.data(), v.size() * sizeof(double)); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes(b) {}
  void raw(void* p, std::size_t n) {
    if (n > bytes.size() - pos) throw LoadError("snapshot is truncated");
    std::memcpy(p, bytes.data() + pos, n);
    pos += n;
  }
  template <typename T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  std::vector<double> doubles(std::size_t n) {
    if (n > (bytes.size() - pos) / sizeof(double)) throw LoadError("snapshot is truncated");
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  bool done() const { return pos == bytes.size(); }
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
};

void check_magic(Reader& r, const char (&magic)[5]) {
  char m[5];
  if (r.bytes.size() < 5) throw LoadError("file too short for a header");
  r.raw(m, 5);
  if (std::memcmp(m, magic, 5) != 0) throw LoadError("bad magic");
}

std::size_t checked_cells(std::int32_t nelx, std::int32_t nely) {
  if (nelx < 1 || nely < 1 || nelx > 100000 || nely > 100000) throw LoadError("implausible mesh dimensions");
  return static_cast<std::size_t>(nelx) * static_cast<std::size_t>(nely);
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const DesignState& s, const RminMap& rmin) {
  const auto n = static_cast<std::size_t>(s.nelx) * static_cast<std::size_t>(s.nely);
  if (s.x.size() != n || s.x_filtered.size() != n || s.x_projected.size() != n || rmin.size() != n)
    throw ContractError("snapshot arrays do not match the mesh");
  Writer w;
  w.raw(kStateMagic, 5);
  w.put<std::int32_t>(s.nelx);
  w.put<std::int32_t>(s.nely);
  w.put<std::int32_t>(s.iteration);
  w.doubles(s.x);
  w.doubles(s.x_filtered);
  w.doubles(s.x_projected);
  w.doubles(rmin.values());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.compliance_history.size()));
  w.doubles(s.compliance_history);
  w.put<double>(s.beta);
  w.put<double>(s.eta);
  return std::move(w.out);
}

Snapshot decode_snapshot(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  check_magic(r, kStateMagic);
  Snapshot snap;
  auto& s = snap.state;
  s.nelx = r.get<std::int32_t>();
  s.nely = r.get<std::int32_t>();
  s.iteration = r.get<std::int32_t>();
  const std::size_t n = checked_cells(s.nelx, s.nely);
  if (s.iteration < 0) throw LoadError("negative iteration count");
  s.x = r.doubles(n);
  s.x_filtered = r.doubles(n);
  s.x_projected = r.doubles(n);
  auto rvals = r.doubles(n);
  if (!r.done()) {
    const auto h = r.get<std::uint32_t>();
    s.compliance_history = r.doubles(h);
    s.beta = r.get<double>();
    s.eta = r.get<double>();
    if (!r.done()) throw LoadError("trailing bytes after snapshot");
  }
  try {
    snap.rmin = RminMap(s.nelx, s.nely, std::move(rvals));
  } catch (const Error& e) {
    throw LoadError(std::string("invalid rmin map in snapshot: ") + e.what());
  }
  return snap;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void save_snapshot(const std::filesystem::path& path, const DesignState& state, const RminMap& rmin) {
  write_bytes(path, encode_snapshot(state, rmin));
}

Snapshot load_snapshot(const std::filesystem::path& path) { return decode_snapshot(read_bytes(path)); }

std::vector<std::uint8_t> encode_rmin(const RminMap& rmin) {
  Writer w;
  w.raw(kRminMagic, 5);
  w.put<std::int32_t>(rmin.nelx());
  w.put<std::int32_t>(rmin.nely());
  w.doubles(rmin.values());
  return std::move(w.out);
}

RminMap decode_rmin(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  check_magic(r, kRminMagic);
  const auto nelx = r.get<std::int32_t>();
  const auto nely = r.get<std::int32_t>();
  auto v = r.doubles(checked_cells(nelx, nely));
  if (!r.done()) throw LoadError("trailing bytes after rmin map");
  try {
    return RminMap(nelx, nely, std::move(v));
  } catch (const Error& e) {
    throw LoadError(std::string("invalid rmin map: ") + e.what());
  }
}

void export_density_png(const std::filesystem::path& path, const DesignState& state) {
  io::write_png(path, io::density_to_gray(state.projected_grid()));
}

std::string history_csv(const DesignState& state) {
  std::string out = "iteration,compliance\n";
  for (std::size_t i = 0; i < state.compliance_history.size(); ++i)
    out += fmt::format("{},{:.17g}\n", i + 1, state.compliance_history[i]);
  return out;
}

}  // namespace hitop::topopt
