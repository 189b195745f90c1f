#include "emsi/meshgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace emsi {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

namespace {

void add_marked_facets(Mesh& mesh, const FacetMarkerFn& marker_of) {
  if (!marker_of) return;
  const int npc = mesh.nodes_per_cell();
  std::map<std::vector<int>, int> count;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto cn = mesh.cell(c);
    for (int i = 0; i < npc; ++i) {
      std::vector<int> key;
      for (int k = 0; k < npc; ++k)
        if (k != i) key.push_back(cn[k]);
      std::sort(key.begin(), key.end());
      count[key]++;
    }
  }
  for (const auto& [key, cnt] : count) {
    Vec3 mid = Vec3::Zero();
    for (int id : key) mid += mesh.nodes[id] / static_cast<double>(key.size());
    double area;
    Vec3 n = facet_normal_area(mesh, std::span<const int>(key.data(), key.size()), area);
    int marker = marker_of(mid, n, cnt == 1);
    if (marker != 0) {
      for (int id : key) mesh.facet_nodes.push_back(id);
      mesh.facet_marker.push_back(marker);
    }
  }
}

}  // namespace

Mesh rect_mesh(const std::vector<double>& xs, const std::vector<double>& ys,
               const RegionFn& region_of, const FacetMarkerFn& marker_of) {
  Mesh mesh;
  mesh.dim = 2;
  const int nx = static_cast<int>(xs.size());
  const int ny = static_cast<int>(ys.size());
  auto vid = [&](int i, int j) { return j * nx + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) mesh.nodes.push_back({xs[i], ys[j], 0.0});

  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      Vec3 center = 0.25 * (mesh.nodes[a] + mesh.nodes[b] + mesh.nodes[c] + mesh.nodes[d]);
      int m = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(center);
      int region = region_of ? region_of(center) : 1;
      int quads[4][2] = {{a, b}, {b, c}, {c, d}, {d, a}};
      for (auto& e : quads) {
        mesh.cells.insert(mesh.cells.end(), {e[0], e[1], m});
        mesh.cell_region.push_back(region);
      }
    }
  add_marked_facets(mesh, marker_of);
  finalize_mesh(mesh);
  return mesh;
}

Mesh box_mesh(const std::vector<double>& xs, const std::vector<double>& ys,
              const std::vector<double>& zs, const RegionFn& region_of,
              const FacetMarkerFn& marker_of) {
  Mesh mesh;
  mesh.dim = 3;
  const int nx = static_cast<int>(xs.size());
  const int ny = static_cast<int>(ys.size());
  const int nz = static_cast<int>(zs.size());
  auto vid = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) mesh.nodes.push_back({xs[i], ys[j], zs[k]});

  // Kuhn subdivision: six tets sharing the main diagonal v0-v7 of each hex
  const int tets[6][4] = {{0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7},
                          {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7}};
  for (int k = 0; k + 1 < nz; ++k)
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        int v[8] = {vid(i, j, k),         vid(i + 1, j, k),     vid(i, j + 1, k),
                    vid(i + 1, j + 1, k), vid(i, j, k + 1),     vid(i + 1, j, k + 1),
                    vid(i, j + 1, k + 1), vid(i + 1, j + 1, k + 1)};
        Vec3 center = Vec3::Zero();
        for (int id : v) center += mesh.nodes[id] / 8.0;
        int region = region_of ? region_of(center) : 1;
        for (auto& t : tets) {
          mesh.cells.insert(mesh.cells.end(), {v[t[0]], v[t[1]], v[t[2]], v[t[3]]});
          mesh.cell_region.push_back(region);
        }
      }
  add_marked_facets(mesh, marker_of);
  finalize_mesh(mesh);
  return mesh;
}

Mesh disk_mesh(double radius, int n_rings, const RegionFn& region_of) {
  Mesh mesh;
  mesh.dim = 2;
  const int na = 8;  // angular count of the innermost ring
  mesh.nodes.push_back({0, 0, 0});
  std::vector<std::vector<int>> rings(n_rings + 1);
  rings[0] = {0};
  for (int r = 1; r <= n_rings; ++r) {
    int m = na * r;
    double rad = radius * r / n_rings;
    for (int a = 0; a < m; ++a) {
      double th = 2.0 * M_PI * a / m;
      rings[r].push_back(static_cast<int>(mesh.nodes.size()));
      mesh.nodes.push_back({rad * std::cos(th), rad * std::sin(th), 0.0});
    }
  }
  auto add_cell = [&](int a, int b, int c) {
    Vec3 centroid = (mesh.nodes[a] + mesh.nodes[b] + mesh.nodes[c]) / 3.0;
    mesh.cells.insert(mesh.cells.end(), {a, b, c});
    mesh.cell_region.push_back(region_of ? region_of(centroid) : 1);
  };
  // fan around the center, then walk both node loops of consecutive rings
  for (int a = 0; a < na; ++a) add_cell(0, rings[1][a], rings[1][(a + 1) % na]);
  for (int r = 2; r <= n_rings; ++r) {
    const auto& inner = rings[r - 1];
    const auto& outer = rings[r];
    int ni = static_cast<int>(inner.size());
    int no = static_cast<int>(outer.size());
    int i = 0, o = 0;
    while (i < ni || o < no) {
      double ai = (i + 1.0) / ni, ao = (o + 1.0) / no;
      if (o < no && (i >= ni || ao <= ai)) {
        add_cell(outer[o % no], outer[(o + 1) % no], inner[i % ni]);
        ++o;
      } else {
        add_cell(inner[i % ni], outer[o % no], inner[(i + 1) % ni]);
        ++i;
      }
    }
  }
  finalize_mesh(mesh);
  return mesh;
}

}  // namespace emsi
