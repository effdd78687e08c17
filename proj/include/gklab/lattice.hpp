#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gklab {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Site = std::int32_t;

// d-dimensional discrete torus with side N. Sites are linearized row-major
// (last coordinate fastest); neighbor lookups go through a precomputed table
// so hot loops stay branch-free.
class TorusGeometry {
 public:
  TorusGeometry(int dim, int side);

  int dim() const { return dim_; }
  int side() const { return side_; }
  Site sites() const { return sites_; }

  // dir 0: +e_axis, dir 1: -e_axis.
  Site neighbor(Site x, int axis, int dir) const {
    return nbr_[static_cast<std::size_t>(x) * 2 * dim_ + 2 * axis + dir];
  }
  const std::vector<Site>& neighbor_table() const { return nbr_; }

  // Every unordered nearest-neighbor pair exactly once (wrap pairs deduped,
  // which matters for N = 2 where x+e and x-e coincide).
  const std::vector<std::pair<Site, Site>>& bonds() const { return bonds_; }

  bool adjacent(Site x, Site y) const;

  Site site_of(const std::vector<int>& coords) const;
  std::vector<int> coords_of(Site x) const;
  // x + delta with modular wrap per coordinate.
  Site shifted(Site x, const std::vector<int>& delta) const;

 private:
  int dim_;
  int side_;
  Site sites_;
  std::vector<Site> nbr_;
  std::vector<std::pair<Site, Site>> bonds_;
};

// Offsets of the cube {-r..r}^d in lexicographic order. Bit i of a window
// pattern is the occupancy at offsets[i]; rate tables depend on this order,
// so it is fixed here and nowhere else.
struct LocalWindow {
  int dim = 1;
  int radius = 0;
  std::vector<std::vector<int>> offsets;
  int origin_bit = 0;

  static LocalWindow cube(int dim, int radius);
  int bits() const { return static_cast<int>(offsets.size()); }
};

// Particle configuration: one occupancy bit per site, stored unpacked for
// O(1) reads in the simulation loop. The packed form exists only in the
// serialization below.
class Configuration {
 public:
  explicit Configuration(std::shared_ptr<const TorusGeometry> g);
  Configuration(std::shared_ptr<const TorusGeometry> g,
                std::vector<std::uint8_t> occupancy);

  const TorusGeometry& geometry() const { return *g_; }
  const std::shared_ptr<const TorusGeometry>& geometry_ptr() const {
    return g_;
  }

  int occupied(Site x) const { return occ_[static_cast<std::size_t>(x)]; }
  const std::vector<std::uint8_t>& occupancy() const { return occ_; }
  Site particle_count() const { return count_; }

  void flip(Site x);
  // Swap occupancies across a nearest-neighbor bond; rejects non-neighbors.
  void exchange(Site x, Site y);
  // (translated(by))_z = eta_{z+by}, indices wrapped.
  Configuration translated(const std::vector<int>& by) const;
  std::uint32_t read_window(Site x, const LocalWindow& w) const;

  // Header (d, N as little-endian uint32) + LSB-first packed bits, row-major.
  std::vector<std::uint8_t> to_bytes() const;
  static Configuration from_bytes(const std::vector<std::uint8_t>& bytes);
  void save(std::ostream& os) const;
  static Configuration load(std::istream& is);

  bool operator==(const Configuration& o) const {
    return occ_ == o.occ_ && g_->dim() == o.g_->dim() &&
           g_->side() == o.g_->side();
  }

 private:
  std::shared_ptr<const TorusGeometry> g_;
  std::vector<std::uint8_t> occ_;
  Site count_;
};

// FNV-1a over the serialized bytes; used by replica manifests.
std::uint64_t config_hash(const Configuration& c);

}  // namespace gklab
