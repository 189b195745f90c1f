#include "emsi/morphing.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <stdexcept>

namespace emsi {

namespace {

// signed volume of the simplex spanned by s against the triangulation points,
// with an absolute scale estimate for tolerance decisions
double orient(const std::vector<Vec3>& pts, const std::array<int, 4>& s, int dim, double& scale) {
  const Vec3& p0 = pts[s[0]];
  Mat3 D = Mat3::Identity();
  for (int k = 1; k <= dim; ++k) D.col(k - 1) = pts[s[k]] - p0;
  if (dim == 2) D.col(2) = Vec3(0, 0, 1);
  scale = 1.0;
  for (int k = 0; k < dim; ++k) scale *= std::max(D.col(k).norm(), 1e-300);
  return D.determinant();
}

// > 0 when p lies strictly inside the circumsphere of positively oriented s
double in_sphere(const std::vector<Vec3>& pts, const std::array<int, 4>& s, const Vec3& p,
                 int dim, double& scale) {
  if (dim == 2) {
    Eigen::Matrix3d M;
    double m = 0.0;
    for (int r = 0; r < 3; ++r) {
      Vec3 d = pts[s[r]] - p;
      M(r, 0) = d.x();
      M(r, 1) = d.y();
      M(r, 2) = d.x() * d.x() + d.y() * d.y();
      m = std::max(m, std::abs(M(r, 2)));
    }
    scale = std::max(m * m, 1e-300);
    return M.determinant();
  }
  Eigen::Matrix4d M;
  double m = 0.0;
  for (int r = 0; r < 4; ++r) {
    Vec3 d = pts[s[r]] - p;
    M(r, 0) = d.x();
    M(r, 1) = d.y();
    M(r, 2) = d.z();
    M(r, 3) = d.squaredNorm();
    m = std::max(m, M(r, 3));
  }
  scale = std::max(m * m * std::sqrt(m), 1e-300);
  // orientation convention flips the 4x4 determinant sign in 3D
  return -M.determinant();
}

// whether p lies within the (closed) face spanned by the given nodes,
// measured in the face plane
bool point_in_face(const std::vector<Vec3>& pts, const std::vector<int>& face, const Vec3& p,
                   int dim) {
  const Vec3& a = pts[face[0]];
  if (dim == 2) {
    Vec3 u = pts[face[1]] - a;
    double t = (p - a).dot(u) / u.squaredNorm();
    return t >= -1e-9 && t <= 1.0 + 1e-9;
  }
  Vec3 u = pts[face[1]] - a, v = pts[face[2]] - a, w = p - a;
  double uu = u.squaredNorm(), vv = v.squaredNorm(), uv = u.dot(v);
  double det = uu * vv - uv * uv;
  if (det <= 0.0) return false;
  double s = (w.dot(u) * vv - w.dot(v) * uv) / det;
  double t = (w.dot(v) * uu - w.dot(u) * uv) / det;
  return s >= -1e-9 && t >= -1e-9 && s + t <= 1.0 + 1e-9;
}

std::array<double, 4> barycentric(const std::vector<Vec3>& pts, const std::array<int, 4>& s,
                                  const Vec3& p, int dim) {
  const Vec3& p0 = pts[s[0]];
  Mat3 D = Mat3::Identity();
  for (int k = 1; k <= dim; ++k) D.col(k - 1) = pts[s[k]] - p0;
  if (dim == 2) D.col(2) = Vec3(0, 0, 1);
  Vec3 xi = D.partialPivLu().solve(p - p0);
  std::array<double, 4> b{0, 0, 0, 0};
  double rest = 0.0;
  for (int k = 1; k <= dim; ++k) {
    b[k] = xi[k - 1];
    rest += xi[k - 1];
  }
  b[0] = 1.0 - rest;  // last weight closes the partition exactly
  return b;
}

struct Builder {
  int dim;
  std::vector<Vec3> pts;  // anchors then super vertices
  std::vector<std::array<int, 4>> simp;
  std::vector<std::array<int, 4>> neigh;
  std::vector<char> alive;
  int n_anchor = 0;
  double bbox_scale = 1.0;

  int nfaces() const { return dim + 1; }

  std::vector<int> face_of(int s, int f) const {
    std::vector<int> out;
    for (int k = 0; k <= dim; ++k)
      if (k != f) out.push_back(simp[s][k]);
    return out;
  }

  void make_super() {
    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    Vec3 c = 0.5 * (lo + hi);
    double r = std::max((hi - lo).norm(), 1e-12) * 50.0;
    bbox_scale = std::max((hi - lo).norm(), 1e-12);
    int base = static_cast<int>(pts.size());
    if (dim == 2) {
      pts.push_back(c + Vec3(-2 * r, -r, 0));
      pts.push_back(c + Vec3(2 * r, -r, 0));
      pts.push_back(c + Vec3(0, 2 * r, 0));
      simp.push_back({base, base + 1, base + 2, -1});
    } else {
      pts.push_back(c + Vec3(-3 * r, -r, -r));
      pts.push_back(c + Vec3(3 * r, -r, -r));
      pts.push_back(c + Vec3(0, 3 * r, -r));
      pts.push_back(c + Vec3(0, 0, 3 * r));
      simp.push_back({base, base + 1, base + 2, base + 3});
    }
    // enforce positive orientation
    double sc;
    if (orient(pts, simp[0], dim, sc) < 0) std::swap(simp[0][0], simp[0][1]);
    neigh.push_back({-1, -1, -1, -1});
    alive.push_back(1);
  }

  int locate(const Vec3& p, int hint) const {
    int s = hint;
    int steps = 0;
    const int max_steps = static_cast<int>(simp.size()) + 8;
    while (s >= 0 && alive[s] && steps++ < max_steps) {
      auto b = barycentric(pts, simp[s], p, dim);
      int worst = 0;
      for (int k = 1; k <= dim; ++k)
        if (b[k] < b[worst]) worst = k;
      if (b[worst] >= -1e-12) return s;
      int next = neigh[s][worst];
      if (next < 0 || !alive[next]) break;
      s = next;
    }
    // robust fallback: best simplex by max-min barycentric weight
    int best = -1;
    double best_min = -1e300;
    for (int t = 0; t < static_cast<int>(simp.size()); ++t) {
      if (!alive[t]) continue;
      auto b = barycentric(pts, simp[t], p, dim);
      double mn = b[0];
      for (int k = 1; k <= dim; ++k) mn = std::min(mn, b[k]);
      if (mn > best_min) {
        best_min = mn;
        best = t;
      }
    }
    return best;
  }

  void insert(int ip, int& hint) {
    const Vec3& p = pts[ip];
    int s0 = locate(p, hint);
    if (s0 < 0) throw std::runtime_error("delaunay: point location failed");

    // cavity = connected bad set, seeded by the containing simplex
    std::set<int> cavity{s0};
    std::deque<int> queue{s0};
    while (!queue.empty()) {
      int s = queue.front();
      queue.pop_front();
      for (int f = 0; f <= dim; ++f) {
        int nb = neigh[s][f];
        if (nb < 0 || cavity.count(nb)) continue;
        double sc;
        double d = in_sphere(pts, simp[nb], p, dim, sc);
        if (d > 1e-10 * sc) {
          cavity.insert(nb);
          queue.push_back(nb);
        }
      }
    }

    // repair: every cavity boundary face must see p from inside (the simplex
    // with the opposite vertex replaced by p stays positive).  A degenerate
    // face means p lies in its plane: if p is on the face itself, swallow the
    // neighbor; otherwise drop the cavity simplex so the face disappears.
    for (int pass = 0; pass < 4096; ++pass) {
      bool changed = false;
      for (int s : std::vector<int>(cavity.begin(), cavity.end())) {
        for (int f = 0; f <= dim; ++f) {
          int nb = neigh[s][f];
          if (nb >= 0 && cavity.count(nb)) continue;
          std::array<int, 4> test = simp[s];
          test[f] = ip;
          double sc;
          double vol = orient(pts, test, dim, sc);
          if (vol > 1e-12 * sc) continue;
          bool on_face =
              vol > -1e-12 * sc && point_in_face(pts, face_of(s, f), p, dim);
          if (on_face && nb >= 0) {
            cavity.insert(nb);
            changed = true;
          } else if (cavity.size() > 1 && s != s0) {
            cavity.erase(s);
            changed = true;
          } else if (nb >= 0) {
            cavity.insert(nb);
            changed = true;
          }
          if (changed) break;
        }
        if (changed) break;
      }
      if (!changed) break;
    }

    // trimming may have disconnected the cavity; keep only the component of s0
    {
      std::set<int> keep{s0};
      std::deque<int> bfs{s0};
      while (!bfs.empty()) {
        int s = bfs.front();
        bfs.pop_front();
        for (int f = 0; f <= dim; ++f) {
          int nb = neigh[s][f];
          if (nb >= 0 && cavity.count(nb) && !keep.count(nb)) {
            keep.insert(nb);
            bfs.push_back(nb);
          }
        }
      }
      cavity = std::move(keep);
    }

    // collect boundary faces (face nodes + outside neighbor)
    struct BFace {
      std::vector<int> nodes;
      int outside;
    };
    std::vector<BFace> boundary;
    for (int s : cavity)
      for (int f = 0; f <= dim; ++f) {
        int nb = neigh[s][f];
        if (nb >= 0 && cavity.count(nb)) continue;
        boundary.push_back({face_of(s, f), nb});
      }

    for (int s : cavity) alive[s] = 0;

    // new simplices: p joined to each boundary face, positively oriented
    std::map<std::vector<int>, std::array<int, 2>> ridge;  // sub-face -> [new simplex, local]
    std::vector<int> created;
    for (const BFace& bf : boundary) {
      std::array<int, 4> s{-1, -1, -1, -1};
      for (size_t k = 0; k < bf.nodes.size(); ++k) s[k] = bf.nodes[k];
      s[dim] = ip;
      double sc;
      if (orient(pts, s, dim, sc) < 0) std::swap(s[0], s[1]);
      int id = static_cast<int>(simp.size());
      simp.push_back(s);
      neigh.push_back({-1, -1, -1, -1});
      alive.push_back(1);
      created.push_back(id);

      // wire the outer neighbor across the face opposite p
      int local_p = -1;
      for (int k = 0; k <= dim; ++k)
        if (simp[id][k] == ip) local_p = k;
      neigh[id][local_p] = bf.outside;
      if (bf.outside >= 0) {
        std::vector<int> key = bf.nodes;
        std::sort(key.begin(), key.end());
        for (int f = 0; f <= dim; ++f) {
          auto of = face_of(bf.outside, f);
          std::sort(of.begin(), of.end());
          if (of == key) neigh[bf.outside][f] = id;
        }
      }
      // wire new-new adjacency through the ridges containing p
      for (int f = 0; f <= dim; ++f) {
        if (f == local_p) continue;
        auto rf = face_of(id, f);
        std::sort(rf.begin(), rf.end());
        auto it = ridge.find(rf);
        if (it == ridge.end()) {
          ridge[rf] = {id, f};
        } else {
          neigh[id][f] = it->second[0];
          neigh[it->second[0]][it->second[1]] = id;
        }
      }
    }
    hint = created.empty() ? 0 : created.back();
  }

  Triangulation finish() {
    Triangulation t;
    t.dim = dim;
    t.points.assign(pts.begin(), pts.begin() + n_anchor);
    std::vector<int> remap(simp.size(), -1);
    for (size_t s = 0; s < simp.size(); ++s) {
      if (!alive[s]) continue;
      bool super = false;
      for (int k = 0; k <= dim; ++k) super = super || simp[s][k] >= n_anchor;
      if (super) continue;
      remap[s] = static_cast<int>(t.simplices.size());
      t.simplices.push_back(simp[s]);
    }
    for (size_t s = 0; s < simp.size(); ++s) {
      if (remap[s] < 0) continue;
      std::array<int, 4> nb{-1, -1, -1, -1};
      for (int k = 0; k <= dim; ++k) {
        int n = neigh[s][k];
        nb[k] = (n >= 0 && remap[n] >= 0) ? remap[n] : -1;
      }
      t.neighbors.push_back(nb);
    }
    return t;
  }
};

}  // namespace

Triangulation delaunay(std::span<const Vec3> anchors, int dim) {
  if (anchors.size() < static_cast<size_t>(dim + 1))
    throw std::runtime_error("delaunay: need at least dim+1 anchor points");
  Builder b;
  b.dim = dim;
  b.pts.assign(anchors.begin(), anchors.end());
  b.n_anchor = static_cast<int>(anchors.size());
  b.make_super();
  int hint = 0;
  for (int i = 0; i < b.n_anchor; ++i) b.insert(i, hint);
  return b.finish();
}

MorphOperator build_morph(const Mesh& mesh, const SubMeshMap& map) {
  MorphOperator op;
  op.dim = mesh.dim;
  op.n_total_nodes = mesh.n_nodes();

  std::vector<char> fixed(mesh.n_nodes(), 0);
  for (int p : map.parent_node_of_child) fixed[p] = 1;
  for (int p : boundary_nodes(mesh)) fixed[p] = 1;
  for (int i = 0; i < mesh.n_nodes(); ++i)
    (fixed[i] ? op.fixed_ids : op.free_ids).push_back(i);

  if (op.free_ids.empty()) return op;  // nothing to morph

  std::vector<Vec3> anchors(op.fixed_ids.size());
  for (size_t k = 0; k < op.fixed_ids.size(); ++k) anchors[k] = mesh.nodes[op.fixed_ids[k]];
  op.tris = delaunay(anchors, mesh.dim);

  double scale = 0.0;
  for (const Vec3& a : anchors) scale = std::max(scale, a.cwiseAbs().maxCoeff());
  scale = std::max(scale, 1e-12);

  op.containing_simplex.resize(op.free_ids.size());
  op.bary_weights.resize(op.free_ids.size());
  for (size_t k = 0; k < op.free_ids.size(); ++k) {
    const Vec3& p = mesh.nodes[op.free_ids[k]];
    int best = -1;
    double best_min = -1e300;
    std::array<double, 4> best_b{};
    for (size_t s = 0; s < op.tris.simplices.size(); ++s) {
      auto b = barycentric(op.tris.points, op.tris.simplices[s], p, mesh.dim);
      double mn = b[0];
      for (int i = 1; i <= mesh.dim; ++i) mn = std::min(mn, b[i]);
      if (mn > best_min) {
        best_min = mn;
        best = static_cast<int>(s);
        best_b = b;
      }
      if (mn >= -1e-12) break;  // genuinely containing simplex found
    }
    if (best < 0 || best_min < -1e-6)
      throw std::runtime_error("build_morph: free node " + std::to_string(op.free_ids[k]) +
                               " lies outside the anchor hull");
    // clip tiny negative weights from the nearest-simplex fallback
    double sum = 0.0;
    for (int i = 0; i <= mesh.dim; ++i) {
      best_b[i] = std::max(best_b[i], 0.0);
      sum += best_b[i];
    }
    for (int i = 0; i <= mesh.dim; ++i) best_b[i] /= sum;
    op.containing_simplex[k] = best;
    op.bary_weights[k] = best_b;
  }
  return op;
}

std::vector<Vec3> morph(const MorphOperator& op, std::span<const Vec3> new_fixed,
                        std::span<const Vec3> current) {
  if (new_fixed.size() != op.fixed_ids.size())
    throw std::runtime_error("morph: wrong number of fixed positions");
  std::vector<Vec3> X(current.begin(), current.end());
  for (size_t k = 0; k < op.fixed_ids.size(); ++k) X[op.fixed_ids[k]] = new_fixed[k];
  for (size_t k = 0; k < op.free_ids.size(); ++k) {
    const auto& s = op.tris.simplices[op.containing_simplex[k]];
    const auto& b = op.bary_weights[k];
    Vec3 p = Vec3::Zero();
    for (int i = 0; i <= op.dim; ++i) p += b[i] * new_fixed[s[i]];
    X[op.free_ids[k]] = p;
  }
  return X;
}

Field mesh_velocity(const Mesh& mesh, std::span<const Vec3> Xnew, std::span<const Vec3> Xold,
                    double dt) {
  if (dt <= 0.0) throw std::runtime_error("mesh_velocity: dt must be positive");
  Field w(mesh, 3);
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    Vec3 v = (Xnew[i] - Xold[i]) / dt;
    for (int c = 0; c < 3; ++c) w.at(i, c) = v[c];
  }
  return w;
}

std::vector<double> cell_volumes(const Mesh& mesh) {
  std::vector<double> v(mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) v[c] = signed_cell_volume(mesh, c);
  return v;
}

QualityReport quality_report(const Mesh& mesh, std::span<const double> ref_volumes) {
  QualityReport q;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    double ratio = signed_cell_volume(mesh, c) / ref_volumes[c];
    q.min_scaled_jacobian = std::min(q.min_scaled_jacobian, ratio);
    if (ratio <= 0.0) ++q.inverted_cells;
  }
  return q;
}

}  // namespace emsi
