#include "emsi/em_solver.hpp"

#include <cmath>

namespace emsi {

namespace {

Vec3 interp3(const Field& f, const ElemCtx& ctx, const QuadraturePoint& q,
             const std::array<double, 4>* lam = nullptr) {
  Vec3 v = Vec3::Zero();
  for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
    double w = lam ? (*lam)[n] : q.lambda[n];
    v += w * f.vec_at(ctx.nodes[n]);
  }
  return v;
}

double interp1(const Field& f, const ElemCtx& ctx, const QuadraturePoint& q,
               const std::array<double, 4>* lam = nullptr) {
  double v = 0.0;
  for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
    double w = lam ? (*lam)[n] : q.lambda[n];
    v += w * f.at(ctx.nodes[n]);
  }
  return v;
}

Mat3 interp_grad(const Field& f9, const ElemCtx& ctx, const QuadraturePoint& q,
                 const std::array<double, 4>* lam = nullptr) {
  Mat3 g = Mat3::Zero();
  for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
    double w = lam ? (*lam)[n] : q.lambda[n];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) g(i, j) += w * f9.at(ctx.nodes[n], 3 * i + j);
  }
  return g;
}

struct LiveSources {
  Vec3 P = Vec3::Zero();
  Vec3 M = Vec3::Zero();
  Vec3 Jfr = Vec3::Zero();
};

// material response at a point: the electromagnetic fields enter live, the
// thermomechanical state is frozen at the staggered values
LiveSources live_sources(const RegionMaterial& rm, const Mat3& gradu, double T, const Vec3& gradT,
                         const Vec3& v, const Vec3& E, const Vec3& B) {
  LiveSources out;
  if (rm.kind == RegionMaterial::Kind::Linear) {
    StateSample s;
    s.T = T;
    s.set_gradu(gradu);
    s.E = E;
    s.B = B;
    s.v = v;
    s.Escr = E + v.cross(B);
    s.gradT = gradT;
    LinearResponse r = eval_linear(rm.lin, s);
    out.P = r.P;
    out.M = r.M;
    Fluxes f = eval_fluxes(rm.lin, gradT, s.Escr, s.Jdet, T);
    out.Jfr = f.Jfr;
  } else if (rm.kind == RegionMaterial::Kind::MagnetoHyperelastic) {
    Mat3 F = gradu + Mat3::Identity();
    auto r = eval_magnetohyperelastic(rm.mhe, F, B);
    out.M = r.M;
  }
  return out;
}

}  // namespace

EMState::EMState(const Mesh& m)
    : mesh(&m),
      phi(m, 1),
      A(m, 3),
      E(m, 3),
      B(m, 3),
      E0(m, 3),
      B0(m, 3),
      P(m, 3),
      P0(m, 3),
      M(m, 3),
      curlM(m, 3),
      Jfr(m, 3),
      q_free(m, 1),
      q_total(m, 1),
      Jtot(m, 3),
      dBdt(m, 3),
      gradu(m, 9),
      T_nodal(m, 1, 293.15),
      gradT(m, 3),
      v(m, 3) {}

void recover_EB(const Field& phi, const Field& A, const Field& A0, double dt, Field& E, Field& B,
                std::span<const char> cell_mask) {
  if (dt <= 0.0) throw std::runtime_error("recover_EB: dt must be positive");
  const Mesh& mesh = *phi.mesh;
  const int dim = mesh.dim;
  Field gphi = project_gradient(phi, cell_mask);
  Field gA = project_gradient(A, cell_mask);
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    for (int c = 0; c < 3; ++c) {
      double grad_c = c < dim ? gphi.at(i, c) : 0.0;
      E.at(i, c) = -grad_c - (A.at(i, c) - A0.coeffs[3 * i + c]) / dt;
    }
    auto d = [&](int comp, int dir) { return dir < dim ? gA.at(i, comp * dim + dir) : 0.0; };
    B.at(i, 0) = d(2, 1) - d(1, 2);
    B.at(i, 1) = d(0, 2) - d(2, 0);
    B.at(i, 2) = d(1, 0) - d(0, 1);
  }
}

void bound_sources(EMState& st, const MaterialSet& mats, const SubMeshMap& map, double dt) {
  const Mesh& mesh = *st.mesh;
  st.P.coeffs.setZero();
  st.M.coeffs.setZero();
  st.Jfr.coeffs.setZero();

  // volume-weighted nodal evaluation over material cells
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(mesh.n_nodes());
  for (int c : map.parent_cell_of_child) {
    const RegionMaterial* rm = mats.find(mesh.cell_region[c]);
    if (!rm || !rm->is_material()) continue;
    double vol = signed_cell_volume(mesh, c);
    for (int id : mesh.cell(c)) {
      Mat3 gu;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) gu(i, j) = st.gradu.at(id, 3 * i + j);
      LiveSources ls = live_sources(*rm, gu, st.T_nodal.at(id), st.gradT.vec_at(id),
                                    st.v.vec_at(id), st.E.vec_at(id), st.B.vec_at(id));
      for (int k = 0; k < 3; ++k) {
        st.P.at(id, k) += vol * ls.P[k];
        st.M.at(id, k) += vol * ls.M[k];
        st.Jfr.at(id, k) += vol * ls.Jfr[k];
      }
      wsum[id] += vol;
    }
  }
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    if (wsum[i] <= 0.0) continue;
    for (int k = 0; k < 3; ++k) {
      st.P.at(i, k) /= wsum[i];
      st.M.at(i, k) /= wsum[i];
      st.Jfr.at(i, k) /= wsum[i];
    }
  }

  // curl of the cached magnetization, material-side projection
  std::vector<char> mask(mesh.n_cells(), 0);
  for (int c : map.parent_cell_of_child)
    if (mats.is_material(mesh.cell_region[c])) mask[c] = 1;
  Field gM = project_gradient(st.M, mask);
  const int dim = mesh.dim;
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    auto d = [&](int comp, int dir) { return dir < dim ? gM.at(i, comp * dim + dir) : 0.0; };
    st.curlM.at(i, 0) = d(2, 1) - d(1, 2);
    st.curlM.at(i, 1) = d(0, 2) - d(2, 0);
    st.curlM.at(i, 2) = d(1, 0) - d(0, 1);
  }

  // free and total charge from the projected divergences
  Field Dtot(mesh, 3);
  for (int i = 0; i < mesh.n_nodes(); ++i)
    for (int k = 0; k < 3; ++k) Dtot.at(i, k) = eps0 * st.E.at(i, k) + st.P.at(i, k);
  Field gD = project_gradient(Dtot);
  Field gE = project_gradient(st.E);
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    double div_d = 0.0, div_e = 0.0;
    for (int k = 0; k < dim; ++k) {
      div_d += gD.at(i, k * dim + k);
      div_e += gE.at(i, k * dim + k);
    }
    st.q_free.at(i) = div_d;
    st.q_total.at(i) = eps0 * div_e;
  }

  for (int i = 0; i < mesh.n_nodes(); ++i) {
    Vec3 conv = st.q_free.at(i) * st.v.vec_at(i);
    Vec3 prate = (st.P.vec_at(i) - st.P0.vec_at(i)) / dt;
    for (int k = 0; k < 3; ++k) {
      st.Jtot.at(i, k) = st.Jfr.at(i, k) + conv[k] + prate[k] + st.curlM.at(i, k);
      st.dBdt.at(i, k) = (st.B.at(i, k) - st.B0.at(i, k)) / dt;
    }
  }
}

namespace {

// (-(D - D0) - dt J) at one quadrature point with phi live from the context
Vec3 phi_flux_integrand(const EMState& st, const MaterialSet& mats, const ElemCtx& ctx,
                        const QuadraturePoint& q, const EMOptions& opts) {
  const double dt = opts.dt;
  Vec3 grad_phi = ctx.gradient().row(0);
  Vec3 Arate = Vec3::Zero();
  if (!opts.static_mode)
    for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
      int id = ctx.nodes[n];
      for (int k = 0; k < 3; ++k)
        Arate[k] += q.lambda[n] * (st.A.at(id, k) - st.A.coeffs0[3 * id + k]) / dt;
    }
  Vec3 E = -grad_phi - Arate;
  Vec3 D = eps0 * E;
  Vec3 D0 = opts.static_mode ? Vec3(Vec3::Zero()) : Vec3(eps0 * interp3(st.E0, ctx, q));

  Vec3 J = Vec3::Zero();
  const RegionMaterial* rm = mats.find(ctx.region);
  if (rm && rm->is_material()) {
    Mat3 gu = interp_grad(st.gradu, ctx, q);
    LiveSources ls = live_sources(*rm, gu, interp1(st.T_nodal, ctx, q), interp3(st.gradT, ctx, q),
                                  interp3(st.v, ctx, q), E, interp3(st.B, ctx, q));
    Vec3 P0 = interp3(st.P0, ctx, q);
    J = ls.Jfr + interp1(st.q_free, ctx, q) * interp3(st.v, ctx, q) + (ls.P - P0) / dt +
        interp3(st.curlM, ctx, q);
  }
  return -(D - D0) - dt * J;
}

// dt n.(Jfr + curl M) with the material-side trace, at one facet point
double phi_jump_integrand(const EMState& st, const MaterialSet& mats, const ElemCtx& ctx,
                          const FacetCtx& fc, const QuadraturePoint& q, const EMOptions& opts) {
  const RegionMaterial* rm = mats.find(ctx.region);
  if (!rm || !rm->is_material()) return 0.0;
  auto lam = fc.cell_lambda(q, ctx.dim());
  Vec3 grad_phi = ctx.gradient().row(0);
  Vec3 Arate = Vec3::Zero();
  if (!opts.static_mode)
    for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
      int id = ctx.nodes[n];
      for (int k = 0; k < 3; ++k)
        Arate[k] += lam[n] * (st.A.at(id, k) - st.A.coeffs0[3 * id + k]) / opts.dt;
    }
  Vec3 E = -grad_phi - Arate;
  Mat3 gu = interp_grad(st.gradu, ctx, q, &lam);
  LiveSources ls =
      live_sources(*rm, gu, interp1(st.T_nodal, ctx, q, &lam), interp3(st.gradT, ctx, q, &lam),
                   interp3(st.v, ctx, q, &lam), E, interp3(st.B, ctx, q, &lam));
  Vec3 jump = ls.Jfr + interp3(st.curlM, ctx, q, &lam);
  return opts.dt * fc.normal.dot(jump);
}

}  // namespace

SparseSystem residual_phi(const EMState& st, const MaterialSet& mats,
                          const std::vector<AssemblyFacet>& interface, const EMOptions& opts,
                          const DirichletBC& bc) {
  auto kernel = [&](const ElemCtx& ctx, Eigen::VectorXd& r) {
    const auto& rule = volume_rule(ctx.dim());
    for (const auto& q : rule.points) {
      Vec3 flux = phi_flux_integrand(st, mats, ctx, q, opts);
      for (int n = 0; n < ctx.n_cell_nodes(); ++n)
        r[n] += q.weight * ctx.geo.volume * flux.dot(ctx.geo.grad_shape[n]);
    }
  };

  auto facet_kernel = [&](const ElemCtx& ctx, const FacetCtx& fc, Eigen::VectorXd& r) {
    const auto& rule = facet_rule(ctx.dim());
    for (const auto& q : rule.points) {
      double val = phi_jump_integrand(st, mats, ctx, fc, q, opts);
      auto lam = fc.cell_lambda(q, ctx.dim());
      for (int n = 0; n < ctx.n_cell_nodes(); ++n)
        r[n] += q.weight * fc.area * val * lam[n];
    }
  };

  std::vector<FacetJob> jobs;
  if (!interface.empty()) jobs.push_back({interface, facet_kernel});
  return assemble(*st.mesh, st.phi, kernel, jobs, bc);
}

SparseSystem residual_A(const EMState& st, const MaterialSet& mats, const EMOptions& opts,
                        const DirichletBC& bc) {
  const double dt = opts.dt;

  auto kernel = [&](const ElemCtx& ctx, Eigen::VectorXd& r) {
    const auto& rule = volume_rule(ctx.dim());
    auto gA = ctx.gradient();  // live, cell constant
    Vec3 B(gA(2, 1) - gA(1, 2), gA(0, 2) - gA(2, 0), gA(1, 0) - gA(0, 1));
    Vec3 grad_phi = Vec3::Zero();
    for (int n = 0; n < ctx.n_cell_nodes(); ++n)
      grad_phi += st.phi.at(ctx.nodes[n]) * ctx.geo.grad_shape[n];

    for (const auto& q : rule.points) {
      Eigen::VectorXd Aq = ctx.value(q);
      Vec3 A0 = Vec3::Zero(), A00 = Vec3::Zero();
      for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
        int id = ctx.nodes[n];
        for (int k = 0; k < 3; ++k) {
          A0[k] += q.lambda[n] * st.A.coeffs0[3 * id + k];
          A00[k] += q.lambda[n] * st.A.coeffs00[3 * id + k];
        }
      }
      Vec3 E = opts.static_mode
                   ? Vec3(-grad_phi)
                   : Vec3(-grad_phi - Vec3(Aq[0] - A0[0], Aq[1] - A0[1], Aq[2] - A0[2]) / dt);

      Vec3 Jsrc = Vec3::Zero();
      Vec3 M = Vec3::Zero();
      const RegionMaterial* rm = mats.find(ctx.region);
      if (rm && rm->is_material()) {
        Mat3 gu = interp_grad(st.gradu, ctx, q);
        LiveSources ls = live_sources(*rm, gu, interp1(st.T_nodal, ctx, q),
                                      interp3(st.gradT, ctx, q), interp3(st.v, ctx, q), E, B);
        Vec3 P0 = interp3(st.P0, ctx, q);
        Jsrc = ls.Jfr + (ls.P - P0) / dt;
        M = ls.M;
      }

      const double wv = q.weight * ctx.geo.volume;
      for (int n = 0; n < ctx.n_cell_nodes(); ++n)
        for (int j = 0; j < 3; ++j) {
          double val = Jsrc[j] * q.lambda[n];
          if (!opts.static_mode)
            val -= eps0 * (Aq[j] - 2.0 * A0[j] + A00[j]) / (dt * dt) * q.lambda[n];
          for (int k = 0; k < 3; ++k) {
            val -= gA(j, k) / mu0 * ctx.geo.grad_shape[n][k];
            for (int i = 0; i < 3; ++i)
              val -= levi_civita(j, k, i) * M[i] * ctx.geo.grad_shape[n][k];
          }
          r[3 * n + j] += wv * val;
        }
    }
  };

  return assemble(*st.mesh, st.A, kernel, {}, bc);
}

EMStepReport solve_em_step(EMState& st, const MaterialSet& mats,
                           const std::vector<AssemblyFacet>& interface, const EMOptions& opts,
                           const DirichletBC& bc_phi, const DirichletBC& bc_A) {
  EMStepReport rep;
  rep.phi = newton_solve([&]() { return residual_phi(st, mats, interface, opts, bc_phi); },
                         st.phi, opts.newton);
  rep.A =
      newton_solve([&]() { return residual_A(st, mats, opts, bc_A); }, st.A, opts.newton);
  return rep;
}

double total_charge(const EMState& st, std::vector<double>* cellwise) {
  const Mesh& mesh = *st.mesh;
  const int dim = mesh.dim;
  if (cellwise) cellwise->assign(mesh.n_cells(), 0.0);
  double total = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    CellGeometry g = cell_geometry(mesh, c);
    auto cn = mesh.cell(c);
    double div = 0.0;
    for (int n = 0; n <= dim; ++n)
      for (int k = 0; k < 3; ++k) div += st.E.at(cn[n], k) * g.grad_shape[n][k];
    double q = eps0 * div * g.volume;
    if (cellwise) (*cellwise)[c] = q;
    total += q;
  }
  return total;
}

ChargeBalance charge_balance(const EMState& st, const MaterialSet& mats,
                             const std::vector<AssemblyFacet>& interface, const EMOptions& opts) {
  ChargeBalance cb;
  SparseSystem sys = residual_phi(st, mats, interface, opts, DirichletBC{});
  cb.assembled_sum = sys.residual.sum();

  // independent quadrature of the interface jump source (constant test
  // function); the assembled volume terms telescope by partition of unity
  const Mesh& mesh = *st.mesh;
  for (const AssemblyFacet& af : interface) {
    ElemCtx ctx;
    ctx.mesh = &mesh;
    ctx.cell = af.cell;
    ctx.region = mesh.cell_region[af.cell];
    ctx.n_comp = 1;
    ctx.active.resize(1, mesh.nodes_per_cell());
    auto cn = mesh.cell(af.cell);
    for (int n = 0; n < mesh.nodes_per_cell(); ++n) {
      ctx.nodes[n] = cn[n];
      ctx.active(0, n) = st.phi.at(cn[n]);
    }
    ctx.geo = cell_geometry(mesh, af.cell);
    FacetCtx fc;
    fc.cell_ctx = &ctx;
    int opposite = -1;
    for (int l = 0; l < mesh.nodes_per_cell(); ++l) {
      bool inf = false;
      for (int k = 0; k < mesh.nodes_per_facet(); ++k)
        if (cn[l] == af.nodes[k]) inf = true;
      if (!inf) opposite = l;
    }
    for (int k = 0; k < mesh.nodes_per_facet(); ++k) {
      fc.facet_nodes[k] = af.nodes[k];
      for (int l = 0; l < mesh.nodes_per_cell(); ++l)
        if (cn[l] == af.nodes[k]) fc.local_nodes[k] = l;
    }
    fc.normal = ctx.geo.facet_normal[opposite];
    fc.area = ctx.geo.facet_area[opposite];

    const auto& rule = facet_rule(mesh.dim);
    for (const auto& q : rule.points)
      cb.interface_source += q.weight * fc.area * phi_jump_integrand(st, mats, ctx, fc, q, opts);
  }

  std::vector<double> qc;
  total_charge(st, &qc);
  double qsum = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    CellGeometry g = cell_geometry(mesh, c);
    auto cn = mesh.cell(c);
    double div0 = 0.0;
    for (int n = 0; n <= mesh.dim; ++n)
      for (int k = 0; k < 3; ++k) div0 += st.E0.at(cn[n], k) * g.grad_shape[n][k];
    double q0 = eps0 * div0 * g.volume;
    cb.charge_rate += (qc[c] - q0) / opts.dt;
    qsum += std::abs(qc[c] - q0);
  }
  cb.dominant = qsum + std::abs(cb.interface_source) + 1e-300;
  return cb;
}

}  // namespace emsi
