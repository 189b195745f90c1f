#include "emsi/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace emsi {

bool Mesh::has_facet_marker(int marker) const {
  return std::find(facet_marker.begin(), facet_marker.end(), marker) != facet_marker.end();
}

bool Mesh::has_region(int marker) const {
  return std::find(cell_region.begin(), cell_region.end(), marker) != cell_region.end();
}

double signed_cell_volume(const Mesh& mesh, int c) {
  auto cn = mesh.cell(c);
  const Vec3& p0 = mesh.nodes[cn[0]];
  if (mesh.dim == 2) {
    Vec3 a = mesh.nodes[cn[1]] - p0, b = mesh.nodes[cn[2]] - p0;
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }
  Vec3 a = mesh.nodes[cn[1]] - p0, b = mesh.nodes[cn[2]] - p0, d = mesh.nodes[cn[3]] - p0;
  return a.dot(b.cross(d)) / 6.0;
}

CellGeometry cell_geometry(const Mesh& mesh, int c) {
  auto cn = mesh.cell(c);
  const Vec3& p0 = mesh.nodes[cn[0]];
  CellGeometry g;
  Mat3 D = Mat3::Identity();
  for (int k = 1; k <= mesh.dim; ++k) D.col(k - 1) = mesh.nodes[cn[k]] - p0;
  if (mesh.dim == 2) D.col(2) = Vec3(0, 0, 1);
  double det = D.determinant();
  double scale = D.cwiseAbs().maxCoeff();
  if (std::abs(det) <= 1e-14 * scale * scale * scale) {
    Eigen::JacobiSVD<Mat3> svd(D);
    double cond = svd.singularValues()(0) / std::max(svd.singularValues()(2), 1e-300);
    throw std::runtime_error("degenerate cell " + std::to_string(c) +
                             ": reference map condition number " + std::to_string(cond));
  }
  g.jacobian = D;
  g.jac_inv = D.inverse();
  g.volume = det / (mesh.dim == 2 ? 2.0 : 6.0);
  if (g.volume <= 0.0)
    throw std::runtime_error("cell " + std::to_string(c) + " has non-positive volume");

  // grad N_k = row (k-1) of D^{-1}; grad N_0 closes the partition of unity exactly.
  Vec3 sum = Vec3::Zero();
  for (int k = 1; k <= mesh.dim; ++k) {
    g.grad_shape[k] = g.jac_inv.row(k - 1);
    if (mesh.dim == 2) g.grad_shape[k].z() = 0.0;
    sum += g.grad_shape[k];
  }
  g.grad_shape[0] = -sum;

  // facet opposite node i: outward normal is -grad N_i / |grad N_i|.
  for (int i = 0; i <= mesh.dim; ++i) {
    double n = g.grad_shape[i].norm();
    g.facet_normal[i] = -g.grad_shape[i] / n;
    // |grad N_i| = 1/h_i and V = A_i h_i / dim  =>  A_i = dim * V * |grad N_i|
    g.facet_area[i] = mesh.dim * g.volume * n;
  }
  return g;
}

Vec3 facet_normal_area(const Mesh& mesh, std::span<const int> fn, double& area) {
  if (mesh.dim == 2) {
    Vec3 e = mesh.nodes[fn[1]] - mesh.nodes[fn[0]];
    area = e.norm();
    return Vec3(e.y(), -e.x(), 0.0) / area;  // orientation fixed by caller
  }
  Vec3 a = mesh.nodes[fn[1]] - mesh.nodes[fn[0]];
  Vec3 b = mesh.nodes[fn[2]] - mesh.nodes[fn[0]];
  Vec3 n = a.cross(b);
  area = 0.5 * n.norm();
  return n.normalized();
}

void finalize_mesh(Mesh& mesh) {
  if (mesh.dim != 2 && mesh.dim != 3) throw std::runtime_error("mesh dimension must be 2 or 3");
  const int npc = mesh.nodes_per_cell();
  if (static_cast<int>(mesh.cells.size()) != npc * mesh.n_cells())
    throw std::runtime_error("cell connectivity size mismatch");
  for (int id : mesh.cells)
    if (id < 0 || id >= mesh.n_nodes())
      throw std::runtime_error("cell references unknown node " + std::to_string(id));
  for (int id : mesh.facet_nodes)
    if (id < 0 || id >= mesh.n_nodes())
      throw std::runtime_error("facet references unknown node " + std::to_string(id));

  mesh.reordered_cells = 0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    double v = signed_cell_volume(mesh, c);
    double h = 0.0;
    auto cn = mesh.cell(c);
    for (int a = 0; a < npc; ++a)
      for (int b = a + 1; b < npc; ++b)
        h = std::max(h, (mesh.nodes[cn[a]] - mesh.nodes[cn[b]]).norm());
    if (std::abs(v) <= 1e-14 * std::pow(h, mesh.dim))
      throw std::runtime_error("cell " + std::to_string(c) + " is degenerate (zero volume)");
    if (v < 0.0) {
      std::swap(mesh.cell(c)[0], mesh.cell(c)[1]);
      ++mesh.reordered_cells;
    }
  }

  // every marked facet must match a cell face, shared by at most two cells
  std::map<std::vector<int>, int> face_count;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto cn = mesh.cell(c);
    for (int i = 0; i < npc; ++i) {
      std::vector<int> key;
      for (int k = 0; k < npc; ++k)
        if (k != i) key.push_back(cn[k]);
      std::sort(key.begin(), key.end());
      face_count[key]++;
    }
  }
  for (int f = 0; f < mesh.n_facets(); ++f) {
    auto fn = mesh.facet(f);
    std::vector<int> key(fn.begin(), fn.end());
    std::sort(key.begin(), key.end());
    auto it = face_count.find(key);
    if (it == face_count.end())
      throw std::runtime_error("facet " + std::to_string(f) + " does not match any cell face");
    if (it->second > 2)
      throw std::runtime_error("facet " + std::to_string(f) + " shared by more than two cells");
  }
}

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  Mesh mesh;
  int n_nodes = 0, n_cells = 0, n_facets = 0;
  int line_no = 0;
  std::string line;

  auto next_tokens = [&](std::vector<std::string>& toks) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      toks.clear();
      std::string t;
      while (ss >> t) toks.push_back(t);
      if (!toks.empty()) return true;
    }
    return false;
  };

  auto parse_fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
  };

  std::vector<std::string> toks;
  if (!next_tokens(toks)) throw parse_fail("empty mesh file");
  if (toks.size() != 5 || toks[0] != "emsimesh") throw parse_fail("expected header 'emsimesh <dim> <n_nodes> <n_cells> <n_facets>'");
  try {
    mesh.dim = std::stoi(toks[1]);
    n_nodes = std::stoi(toks[2]);
    n_cells = std::stoi(toks[3]);
    n_facets = std::stoi(toks[4]);
  } catch (const std::exception&) {
    throw parse_fail("malformed header counts");
  }
  if (mesh.dim != 2 && mesh.dim != 3) throw parse_fail("dimension must be 2 or 3");

  auto to_double = [&](const std::string& s) {
    try {
      size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw parse_fail("bad number '" + s + "'");
    }
  };
  auto to_int = [&](const std::string& s) {
    try {
      size_t pos = 0;
      int v = std::stoi(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw parse_fail("bad integer '" + s + "'");
    }
  };

  mesh.nodes.reserve(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    if (!next_tokens(toks)) throw parse_fail("unexpected end of file in node block");
    if (static_cast<int>(toks.size()) != mesh.dim) throw parse_fail("node line needs " + std::to_string(mesh.dim) + " coordinates");
    Vec3 p(to_double(toks[0]), to_double(toks[1]), mesh.dim == 3 ? to_double(toks[2]) : 0.0);
    mesh.nodes.push_back(p);
  }
  for (int c = 0; c < n_cells; ++c) {
    if (!next_tokens(toks)) throw parse_fail("unexpected end of file in cell block");
    if (static_cast<int>(toks.size()) != mesh.dim + 2) throw parse_fail("cell line needs " + std::to_string(mesh.dim + 1) + " node ids and a region marker");
    for (int k = 0; k <= mesh.dim; ++k) mesh.cells.push_back(to_int(toks[k]));
    mesh.cell_region.push_back(to_int(toks[mesh.dim + 1]));
  }
  for (int f = 0; f < n_facets; ++f) {
    if (!next_tokens(toks)) throw parse_fail("unexpected end of file in facet block");
    if (static_cast<int>(toks.size()) != mesh.dim + 1) throw parse_fail("facet line needs " + std::to_string(mesh.dim) + " node ids and a marker");
    for (int k = 0; k < mesh.dim; ++k) mesh.facet_nodes.push_back(to_int(toks[k]));
    mesh.facet_marker.push_back(to_int(toks[mesh.dim]));
  }
  if (next_tokens(toks)) throw parse_fail("trailing content after facet block");

  finalize_mesh(mesh);
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh file: " + path);
  char buf[128];
  out << "emsimesh " << mesh.dim << ' ' << mesh.n_nodes() << ' ' << mesh.n_cells() << ' '
      << mesh.n_facets() << '\n';
  for (const Vec3& p : mesh.nodes) {
    if (mesh.dim == 2)
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x(), p.y());
    else
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int id : mesh.cell(c)) out << id << ' ';
    out << mesh.cell_region[c] << '\n';
  }
  for (int f = 0; f < mesh.n_facets(); ++f) {
    for (int id : mesh.facet(f)) out << id << ' ';
    out << mesh.facet_marker[f] << '\n';
  }
}

SubMeshMap extract_submesh(const Mesh& mesh, int region) {
  return extract_submesh(mesh, std::vector<int>{region});
}

SubMeshMap extract_submesh(const Mesh& mesh, const std::vector<int>& regions) {
  std::set<int> want(regions.begin(), regions.end());
  SubMeshMap map;
  map.child.dim = mesh.dim;
  map.child_node_of_parent.assign(mesh.n_nodes(), -1);

  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (!want.count(mesh.cell_region[c])) continue;
    map.parent_cell_of_child.push_back(c);
    for (int id : mesh.cell(c)) {
      if (map.child_node_of_parent[id] < 0) {
        map.child_node_of_parent[id] = static_cast<int>(map.parent_node_of_child.size());
        map.parent_node_of_child.push_back(id);
        map.child.nodes.push_back(mesh.nodes[id]);
      }
      map.child.cells.push_back(map.child_node_of_parent[id]);
    }
    map.child.cell_region.push_back(mesh.cell_region[c]);
  }
  if (map.parent_cell_of_child.empty()) {
    std::string s;
    for (int r : regions) s += std::to_string(r) + " ";
    throw std::runtime_error("extract_submesh: no cell carries region marker(s) " + s);
  }

  // inherit parent facet markers for facets fully contained in the child
  for (int f = 0; f < mesh.n_facets(); ++f) {
    auto fn = mesh.facet(f);
    bool inside = true;
    for (int id : fn) inside = inside && map.child_node_of_parent[id] >= 0;
    if (!inside) continue;
    // keep only facets that match a child cell face
    for (int id : fn) map.child.facet_nodes.push_back(map.child_node_of_parent[id]);
    map.child.facet_marker.push_back(mesh.facet_marker[f]);
  }
  // drop inherited facets that do not match any child face (e.g. facets of a
  // different region that happen to touch child nodes only)
  {
    std::set<std::vector<int>> faces;
    int npc = map.child.nodes_per_cell();
    for (int c = 0; c < map.child.n_cells(); ++c) {
      auto cn = map.child.cell(c);
      for (int i = 0; i < npc; ++i) {
        std::vector<int> key;
        for (int k = 0; k < npc; ++k)
          if (k != i) key.push_back(cn[k]);
        std::sort(key.begin(), key.end());
        faces.insert(key);
      }
    }
    std::vector<int> keep_nodes;
    std::vector<int> keep_marker;
    for (int f = 0; f < map.child.n_facets(); ++f) {
      auto fn = map.child.facet(f);
      std::vector<int> key(fn.begin(), fn.end());
      std::sort(key.begin(), key.end());
      if (faces.count(key)) {
        keep_nodes.insert(keep_nodes.end(), fn.begin(), fn.end());
        keep_marker.push_back(map.child.facet_marker[f]);
      }
    }
    map.child.facet_nodes = std::move(keep_nodes);
    map.child.facet_marker = std::move(keep_marker);
  }

  finalize_mesh(map.child);
  return map;
}

namespace {

// face key -> (cell, opposite local node) adjacency for a mesh
std::map<std::vector<int>, std::vector<std::pair<int, int>>> build_face_adjacency(const Mesh& mesh) {
  std::map<std::vector<int>, std::vector<std::pair<int, int>>> adj;
  const int npc = mesh.nodes_per_cell();
  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto cn = mesh.cell(c);
    for (int i = 0; i < npc; ++i) {
      std::vector<int> key;
      for (int k = 0; k < npc; ++k)
        if (k != i) key.push_back(cn[k]);
      std::sort(key.begin(), key.end());
      adj[key].push_back({c, i});
    }
  }
  return adj;
}

}  // namespace

std::vector<InterfaceFacet> interface_facets(const Mesh& parent, const SubMeshMap& map) {
  std::vector<char> in_region(parent.n_cells(), 0);
  for (int c : map.parent_cell_of_child) in_region[c] = 1;

  auto adj = build_face_adjacency(parent);
  std::vector<InterfaceFacet> out;
  for (const auto& [key, cells] : adj) {
    if (cells.size() != 2) continue;
    auto [c0, l0] = cells[0];
    auto [c1, l1] = cells[1];
    if (in_region[c0] == in_region[c1]) continue;
    InterfaceFacet f;
    if (in_region[c0]) {
      f.cell_in = c0;
      f.cell_out = c1;
    } else {
      f.cell_in = c1;
      f.cell_out = c0;
      l0 = l1;
    }
    for (size_t k = 0; k < key.size(); ++k) f.nodes[k] = key[k];
    CellGeometry g = cell_geometry(parent, f.cell_in);
    // l0 is the local node opposite the shared face in cell_in
    f.normal = g.facet_normal[l0];
    f.area = g.facet_area[l0];
    out.push_back(f);
  }
  return out;
}

std::vector<int> boundary_nodes(const Mesh& mesh) {
  auto adj = build_face_adjacency(mesh);
  std::vector<char> on_boundary(mesh.n_nodes(), 0);
  for (const auto& [key, cells] : adj)
    if (cells.size() == 1)
      for (int id : key) on_boundary[id] = 1;
  std::vector<int> out;
  for (int i = 0; i < mesh.n_nodes(); ++i)
    if (on_boundary[i]) out.push_back(i);
  return out;
}

std::vector<MarkedFacet> resolve_facets(const Mesh& mesh, const std::vector<int>& markers) {
  std::set<int> want(markers.begin(), markers.end());
  auto adj = build_face_adjacency(mesh);
  std::vector<MarkedFacet> out;
  for (int f = 0; f < mesh.n_facets(); ++f) {
    if (!want.count(mesh.facet_marker[f])) continue;
    auto fn = mesh.facet(f);
    std::vector<int> key(fn.begin(), fn.end());
    std::sort(key.begin(), key.end());
    auto it = adj.find(key);
    if (it == adj.end()) throw std::runtime_error("marked facet " + std::to_string(f) + " not on any cell");
    MarkedFacet m;
    m.facet = f;
    m.cell_in = it->second[0].first;
    m.cell_out = it->second.size() > 1 ? it->second[1].first : -1;
    CellGeometry g = cell_geometry(mesh, m.cell_in);
    m.normal = g.facet_normal[it->second[0].second];
    m.area = g.facet_area[it->second[0].second];
    out.push_back(m);
  }
  return out;
}

}  // namespace emsi
