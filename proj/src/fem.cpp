#include "emsi/fem.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <map>

namespace emsi {

namespace {

QuadratureRule make_volume_rule(int dim, int degree) {
  QuadratureRule r;
  r.degree = degree;
  if (dim == 2) {
    if (degree <= 1) {
      r.points = {{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0}, 1.0}};
    } else if (degree <= 2) {
      r.points = {{{0.5, 0.5, 0.0, 0}, 1.0 / 3},
                  {{0.0, 0.5, 0.5, 0}, 1.0 / 3},
                  {{0.5, 0.0, 0.5, 0}, 1.0 / 3}};
    } else {
      // Dunavant degree-4, 6 points
      const double a1 = 0.108103018168070, b1 = 0.445948490915965;
      const double a2 = 0.816847572980459, b2 = 0.091576213509771;
      const double w1 = 0.223381589678011, w2 = 0.109951743655322;
      r.points = {{{a1, b1, b1, 0}, w1}, {{b1, a1, b1, 0}, w1}, {{b1, b1, a1, 0}, w1},
                  {{a2, b2, b2, 0}, w2}, {{b2, a2, b2, 0}, w2}, {{b2, b2, a2, 0}, w2}};
    }
  } else {
    if (degree <= 1) {
      r.points = {{{0.25, 0.25, 0.25, 0.25}, 1.0}};
    } else if (degree <= 2) {
      const double a = 0.585410196624969, b = 0.138196601125011;
      r.points = {{{a, b, b, b}, 0.25}, {{b, a, b, b}, 0.25}, {{b, b, a, b}, 0.25}, {{b, b, b, a}, 0.25}};
    } else {
      // Keast degree-3, 5 points (one negative weight)
      r.points = {{{0.25, 0.25, 0.25, 0.25}, -0.8},
                  {{0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6}, 0.45},
                  {{1.0 / 6, 0.5, 1.0 / 6, 1.0 / 6}, 0.45},
                  {{1.0 / 6, 1.0 / 6, 0.5, 1.0 / 6}, 0.45},
                  {{1.0 / 6, 1.0 / 6, 1.0 / 6, 0.5}, 0.45}};
    }
  }
  return r;
}

QuadratureRule make_facet_rule(int dim, int degree) {
  QuadratureRule r;
  r.degree = degree;
  if (dim == 2) {
    // segment, 2-point Gauss
    const double g = 0.5 / std::sqrt(3.0);
    r.points = {{{0.5 + g, 0.5 - g, 0, 0}, 0.5}, {{0.5 - g, 0.5 + g, 0, 0}, 0.5}};
  } else {
    // triangle midpoints, degree 2
    r.points = {{{0.5, 0.5, 0.0, 0}, 1.0 / 3},
                {{0.0, 0.5, 0.5, 0}, 1.0 / 3},
                {{0.5, 0.0, 0.5, 0}, 1.0 / 3}};
  }
  return r;
}

}  // namespace

const QuadratureRule& volume_rule(int dim, int degree) {
  static const QuadratureRule t1 = make_volume_rule(2, 1), t2 = make_volume_rule(2, 2),
                              t4 = make_volume_rule(2, 4);
  static const QuadratureRule h1 = make_volume_rule(3, 1), h2 = make_volume_rule(3, 2),
                              h3 = make_volume_rule(3, 3);
  if (dim == 2) return degree <= 1 ? t1 : (degree <= 2 ? t2 : t4);
  return degree <= 1 ? h1 : (degree <= 2 ? h2 : h3);
}

const QuadratureRule& facet_rule(int dim, int degree) {
  static const QuadratureRule f2 = make_facet_rule(2, 2), f3 = make_facet_rule(3, 2);
  (void)degree;
  return dim == 2 ? f2 : f3;
}

SparseSystem assemble(const Mesh& mesh, const Field& active, const CellKernel& kernel,
                      const std::vector<FacetJob>& facet_jobs, const DirichletBC& bc,
                      const AssemblyOptions& opts) {
  const int nc = active.n_comp;
  const int npc = mesh.nodes_per_cell();
  const int nloc = nc * npc;
  const int ndof = active.n_dof();

  SparseSystem sys;
  sys.residual = Eigen::VectorXd::Zero(ndof);
  sys.constraints = bc.entries;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.n_cells()) * nloc * nloc);

  // group facet jobs by adjacent cell so FD covers their contributions too
  std::map<int, std::vector<std::pair<const FacetJob*, const AssemblyFacet*>>> facets_of_cell;
  for (const FacetJob& job : facet_jobs)
    for (const AssemblyFacet& f : job.facets) facets_of_cell[f.cell].push_back({&job, &f});

  std::vector<char> constrained(ndof, 0);
  for (auto [dof, v] : bc.entries) constrained[dof] = 1;

  ElemCtx ctx;
  ctx.mesh = &mesh;
  ctx.n_comp = nc;
  ctx.active.resize(nc, npc);

  Eigen::VectorXd r_local(nloc), r_pert(nloc);
  Eigen::MatrixXd j_local(nloc, nloc);

  auto eval_local = [&](Eigen::VectorXd& out) {
    out.setZero();
    if (kernel) kernel(ctx, out);
    auto it = facets_of_cell.find(ctx.cell);
    if (it != facets_of_cell.end()) {
      for (auto [job, af] : it->second) {
        FacetCtx fc;
        fc.cell_ctx = &ctx;
        int opposite = -1;
        for (int l = 0; l < npc; ++l) {
          bool in_facet = false;
          for (int k = 0; k < mesh.nodes_per_facet(); ++k)
            if (ctx.nodes[l] == af->nodes[k]) in_facet = true;
          if (!in_facet) opposite = l;
        }
        for (int k = 0; k < mesh.nodes_per_facet(); ++k) {
          fc.facet_nodes[k] = af->nodes[k];
          for (int l = 0; l < npc; ++l)
            if (ctx.nodes[l] == af->nodes[k]) fc.local_nodes[k] = l;
        }
        fc.normal = ctx.geo.facet_normal[opposite];
        fc.area = ctx.geo.facet_area[opposite];
        job->kernel(ctx, fc, out);
      }
    }
  };

  std::vector<int> default_order;
  std::span<const int> order = opts.cell_order;
  if (order.empty()) {
    default_order.resize(mesh.n_cells());
    for (int c = 0; c < mesh.n_cells(); ++c) default_order[c] = c;
    order = default_order;
  }

  for (int c : order) {
    ctx.cell = c;
    ctx.region = mesh.cell_region[c];
    auto cn = mesh.cell(c);
    for (int n = 0; n < npc; ++n) {
      ctx.nodes[n] = cn[n];
      for (int k = 0; k < nc; ++k) ctx.active(k, n) = active.at(cn[n], k);
    }
    ctx.geo = cell_geometry(mesh, c);

    eval_local(r_local);
    if (!r_local.allFinite())
      throw std::runtime_error("assemble: non-finite residual contribution in cell " +
                               std::to_string(c));

    // forward-difference local Jacobian in the active dofs
    for (int n = 0; n < npc; ++n)
      for (int k = 0; k < nc; ++k) {
        const double v0 = ctx.active(k, n);
        const double h = opts.fd_step * (1.0 + std::abs(v0));
        ctx.active(k, n) = v0 + h;
        eval_local(r_pert);
        ctx.active(k, n) = v0;
        j_local.col(nc * n + k) = (r_pert - r_local) / h;
      }
    if (!j_local.allFinite())
      throw std::runtime_error("assemble: non-finite Jacobian contribution in cell " +
                               std::to_string(c));

    for (int n = 0; n < npc; ++n)
      for (int k = 0; k < nc; ++k) {
        const int row = cn[n] * nc + k;
        if (constrained[row]) continue;
        sys.residual[row] += r_local[nc * n + k];
        for (int m = 0; m < npc; ++m)
          for (int l = 0; l < nc; ++l) {
            double v = j_local(nc * n + k, nc * m + l);
            if (v != 0.0) trip.emplace_back(row, cn[m] * nc + l, v);
          }
      }
  }

  for (auto [dof, v] : bc.entries) {
    trip.emplace_back(dof, dof, 1.0);
    sys.residual[dof] = active.coeffs[dof] - v;
  }

  sys.jacobian.resize(ndof, ndof);
  sys.jacobian.setFromTriplets(trip.begin(), trip.end());
  return sys;
}

Eigen::VectorXd solve_linear(const SparseSystem& sys) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(sys.jacobian);
  lu.factorize(sys.jacobian);
  if (lu.info() != Eigen::Success) {
    // report the emptiest column as the best available pivot diagnostic
    int bad = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < sys.jacobian.outerSize(); ++k) {
      double colmax = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys.jacobian, k); it; ++it)
        colmax = std::max(colmax, std::abs(it.value()));
      if (colmax < best) {
        best = colmax;
        bad = k;
      }
    }
    throw std::runtime_error("solve_linear: singular matrix (" + lu.lastErrorMessage() +
                             "), suspect dof " + std::to_string(bad));
  }
  Eigen::VectorXd delta = lu.solve(-sys.residual);
  // one step of iterative refinement keeps the contract on ill-scaled systems
  Eigen::VectorXd defect = sys.jacobian * delta + sys.residual;
  delta -= lu.solve(defect);
  defect = sys.jacobian * delta + sys.residual;
  double rn = sys.residual.norm();
  if (rn > 0.0 && defect.norm() > 1e-10 * rn)
    throw std::runtime_error("solve_linear: defect " + std::to_string(defect.norm() / rn) +
                             " exceeds 1e-10 relative");
  return delta;
}

NewtonReport newton_solve(const std::function<SparseSystem()>& assemble_fn, Field& f,
                          const NewtonOptions& opts) {
  NewtonReport rep;
  SparseSystem sys = assemble_fn();
  for (auto [dof, v] : sys.constraints) f.coeffs[dof] = v;
  if (!sys.constraints.empty()) sys = assemble_fn();

  double rnorm = sys.residual.norm();
  rep.residual_history.push_back(rnorm);
  const double r0 = rnorm;

  while (!(rnorm <= opts.tol_abs || rnorm <= opts.tol_rel * r0)) {
    if (rep.iterations >= opts.max_iter) {
      rep.final_residual = rnorm;
      throw SolveError("newton_solve: no convergence after " + std::to_string(opts.max_iter) +
                           " iterations, residual " + std::to_string(rnorm),
                       rep);
    }
    Eigen::VectorXd delta = solve_linear(sys);
    Eigen::VectorXd base = f.coeffs;
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      f.coeffs = base + step * delta;
      for (auto [dof, v] : sys.constraints) f.coeffs[dof] = v;
      try {
        SparseSystem trial = assemble_fn();
        double rn = trial.residual.norm();
        if (rn < rnorm || rn <= opts.tol_abs) {
          sys = std::move(trial);
          rnorm = rn;
          accepted = true;
          break;
        }
      } catch (const InadmissibleState&) {
        // fall through to halving
      }
      step *= 0.5;
    }
    ++rep.iterations;
    if (!accepted) {
      f.coeffs = base;
      for (auto [dof, v] : sys.constraints) f.coeffs[dof] = v;
      rep.final_residual = rnorm;
      throw SolveError("newton_solve: line search stagnated at residual " + std::to_string(rnorm),
                       rep);
    }
    rep.residual_history.push_back(rnorm);
  }
  rep.converged = true;
  rep.final_residual = rnorm;
  return rep;
}

std::vector<AssemblyFacet> to_assembly_facets(const std::vector<MarkedFacet>& facets,
                                              const Mesh& mesh) {
  std::vector<AssemblyFacet> out;
  out.reserve(facets.size());
  for (const MarkedFacet& m : facets) {
    AssemblyFacet a;
    a.cell = m.cell_in;
    auto fn = mesh.facet(m.facet);
    for (int k = 0; k < mesh.nodes_per_facet(); ++k) a.nodes[k] = fn[k];
    out.push_back(a);
  }
  return out;
}

std::vector<AssemblyFacet> to_assembly_facets(const std::vector<InterfaceFacet>& facets) {
  std::vector<AssemblyFacet> out;
  out.reserve(facets.size());
  for (const InterfaceFacet& m : facets) {
    AssemblyFacet a;
    a.cell = m.cell_in;
    a.nodes = m.nodes;
    out.push_back(a);
  }
  return out;
}

void transfer_nodal(const Field& src, Field& dst, const SubMeshMap& map, TransferDirection dir) {
  if (src.n_comp != dst.n_comp)
    throw std::runtime_error("transfer_nodal: component count mismatch");
  const int nc = src.n_comp;
  for (size_t ci = 0; ci < map.parent_node_of_child.size(); ++ci) {
    int p = map.parent_node_of_child[ci];
    int c = static_cast<int>(ci);
    for (int k = 0; k < nc; ++k) {
      if (dir == TransferDirection::Pull)
        dst.coeffs[static_cast<long>(c) * nc + k] = src.coeffs[static_cast<long>(p) * nc + k];
      else
        dst.coeffs[static_cast<long>(p) * nc + k] = src.coeffs[static_cast<long>(c) * nc + k];
    }
  }
}

Field project_gradient(const Field& f, std::span<const char> cell_mask) {
  const Mesh& mesh = *f.mesh;
  const int dim = mesh.dim;
  const int nc = f.n_comp;
  Field out(mesh, nc * dim);
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(mesh.n_nodes());

  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (!cell_mask.empty() && !cell_mask[c]) continue;
    CellGeometry g = cell_geometry(mesh, c);
    auto cn = mesh.cell(c);
    // cell-constant gradient of each component
    for (int comp = 0; comp < nc; ++comp) {
      Vec3 grad = Vec3::Zero();
      for (int n = 0; n <= dim; ++n) grad += f.at(cn[n], comp) * g.grad_shape[n];
      for (int n = 0; n <= dim; ++n)
        for (int d = 0; d < dim; ++d) out.at(cn[n], comp * dim + d) += g.volume * grad[d];
    }
    for (int n = 0; n <= dim; ++n) wsum[cn[n]] += g.volume;
  }
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    if (wsum[i] <= 0.0) continue;
    for (int k = 0; k < nc * dim; ++k) out.at(i, k) /= wsum[i];
  }
  return out;
}

}  // namespace emsi
