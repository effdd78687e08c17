#include "gklab/lattice.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

namespace gklab {

namespace {

int wrap(int a, int n) {
  int r = a % n;
  return r < 0 ? r + n : r;
}

}  // namespace

TorusGeometry::TorusGeometry(int dim, int side) : dim_(dim), side_(side) {
  if (dim < 1) throw DomainError("torus dimension must be >= 1");
  if (side < 2) throw DomainError("torus side must be >= 2");
  std::int64_t n = 1;
  for (int k = 0; k < dim; ++k) {
    n *= side;
    if (n > (std::int64_t{1} << 30))
      throw CapacityError("torus too large: side^dim exceeds 2^30 sites");
  }
  sites_ = static_cast<Site>(n);

  nbr_.resize(static_cast<std::size_t>(sites_) * 2 * dim_);
  std::vector<int> c(dim_);
  for (Site x = 0; x < sites_; ++x) {
    Site rem = x;
    for (int k = dim_ - 1; k >= 0; --k) {
      c[k] = rem % side_;
      rem /= side_;
    }
    for (int axis = 0; axis < dim_; ++axis) {
      for (int dir = 0; dir < 2; ++dir) {
        int step = dir == 0 ? 1 : -1;
        int keep = c[axis];
        c[axis] = wrap(c[axis] + step, side_);
        nbr_[static_cast<std::size_t>(x) * 2 * dim_ + 2 * axis + dir] =
            site_of(c);
        c[axis] = keep;
      }
    }
  }

  for (Site x = 0; x < sites_; ++x)
    for (int axis = 0; axis < dim_; ++axis) {
      Site y = neighbor(x, axis, 0);
      bonds_.emplace_back(std::min(x, y), std::max(x, y));
    }
  std::sort(bonds_.begin(), bonds_.end());
  bonds_.erase(std::unique(bonds_.begin(), bonds_.end()), bonds_.end());
}

bool TorusGeometry::adjacent(Site x, Site y) const {
  for (int axis = 0; axis < dim_; ++axis)
    for (int dir = 0; dir < 2; ++dir)
      if (neighbor(x, axis, dir) == y && x != y) return true;
  return false;
}

Site TorusGeometry::site_of(const std::vector<int>& coords) const {
  if (static_cast<int>(coords.size()) != dim_)
    throw DomainError("coordinate count does not match dimension");
  Site idx = 0;
  for (int k = 0; k < dim_; ++k) idx = idx * side_ + wrap(coords[k], side_);
  return idx;
}

std::vector<int> TorusGeometry::coords_of(Site x) const {
  std::vector<int> c(dim_);
  for (int k = dim_ - 1; k >= 0; --k) {
    c[k] = x % side_;
    x /= side_;
  }
  return c;
}

Site TorusGeometry::shifted(Site x, const std::vector<int>& delta) const {
  if (static_cast<int>(delta.size()) != dim_)
    throw DomainError("shift vector does not match dimension");
  std::vector<int> c = coords_of(x);
  for (int k = 0; k < dim_; ++k) c[k] = wrap(c[k] + delta[k], side_);
  return site_of(c);
}

LocalWindow LocalWindow::cube(int dim, int radius) {
  if (dim < 1) throw DomainError("window dimension must be >= 1");
  if (radius < 0) throw DomainError("window radius must be >= 0");
  LocalWindow w;
  w.dim = dim;
  w.radius = radius;
  std::vector<int> off(dim, -radius);
  for (;;) {
    w.offsets.push_back(off);
    int k = dim - 1;
    while (k >= 0 && off[k] == radius) off[k--] = -radius;
    if (k < 0) break;
    ++off[k];
  }
  for (std::size_t i = 0; i < w.offsets.size(); ++i)
    if (std::all_of(w.offsets[i].begin(), w.offsets[i].end(),
                    [](int v) { return v == 0; }))
      w.origin_bit = static_cast<int>(i);
  if (w.bits() > 31) throw CapacityError("window exceeds 31 sites");
  return w;
}

Configuration::Configuration(std::shared_ptr<const TorusGeometry> g)
    : g_(std::move(g)), occ_(g_->sites(), 0), count_(0) {}

Configuration::Configuration(std::shared_ptr<const TorusGeometry> g,
                             std::vector<std::uint8_t> occupancy)
    : g_(std::move(g)), occ_(std::move(occupancy)), count_(0) {
  if (static_cast<Site>(occ_.size()) != g_->sites())
    throw DomainError("occupancy size does not match geometry");
  for (auto& v : occ_) {
    if (v > 1) throw DomainError("occupancy values must be 0 or 1");
    count_ += v;
  }
}

void Configuration::flip(Site x) {
  auto& v = occ_[static_cast<std::size_t>(x)];
  count_ += v ? -1 : 1;
  v ^= 1;
}

void Configuration::exchange(Site x, Site y) {
  if (!g_->adjacent(x, y))
    throw DomainError("exchange requires a nearest-neighbor pair");
  std::swap(occ_[static_cast<std::size_t>(x)],
            occ_[static_cast<std::size_t>(y)]);
}

Configuration Configuration::translated(const std::vector<int>& by) const {
  Configuration out(g_);
  for (Site z = 0; z < g_->sites(); ++z)
    out.occ_[static_cast<std::size_t>(z)] =
        occ_[static_cast<std::size_t>(g_->shifted(z, by))];
  out.count_ = count_;
  return out;
}

std::uint32_t Configuration::read_window(Site x, const LocalWindow& w) const {
  if (w.dim != g_->dim())
    throw DomainError("window dimension does not match geometry");
  std::uint32_t pattern = 0;
  for (int i = 0; i < w.bits(); ++i)
    pattern |= static_cast<std::uint32_t>(
                   occ_[static_cast<std::size_t>(g_->shifted(x, w.offsets[i]))])
               << i;
  return pattern;
}

std::vector<std::uint8_t> Configuration::to_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(8 + (occ_.size() + 7) / 8);
  auto push_u32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
  };
  push_u32(static_cast<std::uint32_t>(g_->dim()));
  push_u32(static_cast<std::uint32_t>(g_->side()));
  std::uint8_t acc = 0;
  int nbits = 0;
  for (std::size_t i = 0; i < occ_.size(); ++i) {
    acc |= static_cast<std::uint8_t>(occ_[i] << nbits);
    if (++nbits == 8) {
      out.push_back(acc);
      acc = 0;
      nbits = 0;
    }
  }
  if (nbits > 0) out.push_back(acc);
  return out;
}

Configuration Configuration::from_bytes(
    const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) throw DomainError("snapshot truncated: missing header");
  auto read_u32 = [&bytes](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  int dim = static_cast<int>(read_u32(0));
  int side = static_cast<int>(read_u32(4));
  auto g = std::make_shared<const TorusGeometry>(dim, side);
  std::size_t nsites = static_cast<std::size_t>(g->sites());
  if (bytes.size() != 8 + (nsites + 7) / 8)
    throw DomainError("snapshot truncated: bad payload size");
  std::vector<std::uint8_t> occ(nsites);
  for (std::size_t i = 0; i < nsites; ++i)
    occ[i] = (bytes[8 + i / 8] >> (i % 8)) & 1;
  return Configuration(std::move(g), std::move(occ));
}

void Configuration::save(std::ostream& os) const {
  auto bytes = to_bytes();
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

Configuration Configuration::load(std::istream& is) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

std::uint64_t config_hash(const Configuration& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : c.to_bytes()) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace gklab
