#include "emsi/tm_solver.hpp"

#include <cmath>

namespace emsi {

namespace {

Vec3 interp3(const Field& f, const std::array<int, 4>& nodes, int nn,
             const std::array<double, 4>& lam) {
  Vec3 v = Vec3::Zero();
  for (int n = 0; n < nn; ++n) v += lam[n] * f.vec_at(nodes[n]);
  return v;
}

double interp1(const Field& f, const std::array<int, 4>& nodes, int nn,
               const std::array<double, 4>& lam) {
  double v = 0.0;
  for (int n = 0; n < nn; ++n) v += lam[n] * f.at(nodes[n]);
  return v;
}

std::array<double, 4> lambdas(const QuadraturePoint& q) {
  return {q.lambda[0], q.lambda[1], q.lambda[2], q.lambda[3]};
}

Mat3 grad_from_coeffs(const Eigen::VectorXd& coeffs, const ElemCtx& ctx, int ncomp = 3) {
  Mat3 g = Mat3::Zero();
  for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
    int id = ctx.nodes[n];
    for (int i = 0; i < ncomp; ++i)
      g.row(i) += coeffs[static_cast<long>(id) * ncomp + i] * ctx.geo.grad_shape[n].transpose();
  }
  return g;
}

double eta_of(const RegionMaterial& rm, double T, const Mat3& G, const Vec3& E, const Vec3& B) {
  if (rm.kind == RegionMaterial::Kind::Linear) {
    StateSample s;
    s.T = T;
    s.set_gradu(G);
    s.E = E;
    s.B = B;
    return eval_linear(rm.lin, s).eta;
  }
  return rm.mhe.c_heat * std::log(T / rm.mhe.T_ref);
}

}  // namespace

TMState::TMState(const Mesh& m, double T_init)
    : mesh(&m),
      u(m, 3),
      T(m, 1, T_init),
      E(m, 3),
      B(m, 3),
      E0(m, 3),
      B0(m, 3),
      q_total(m, 1),
      Jtot(m, 3),
      P(m, 3),
      P0(m, 3),
      dBdt(m, 3) {}

Vec3 em_force_density(double q_total, const Vec3& E, const Vec3& Jtot, const Vec3& B,
                      const Vec3& P, const Vec3& P0, const Vec3& dBdt, double dt, double Jdet) {
  Vec3 f = q_total * E + Jtot.cross(B) - ((P - P0) / dt).cross(B) - P.cross(dBdt);
  return Jdet * f;
}

SparseSystem residual_u(const TMState& st, const MaterialSet& mats,
                        const std::vector<TractionLoad>& tractions, const TMOptions& opts,
                        const DirichletBC& bc) {
  const double dt = opts.dt;
  const double scale = opts.load_scale;

  auto kernel = [&](const ElemCtx& ctx, Eigen::VectorXd& r) {
    const RegionMaterial* rm = mats.find(ctx.region);
    if (!rm || !rm->is_material())
      throw std::runtime_error("residual_u: cell " + std::to_string(ctx.cell) +
                               " has no material assigned");
    const double rho0 = rm->rho0();

    Mat3 G = Mat3::Zero();
    for (int n = 0; n < ctx.n_cell_nodes(); ++n)
      for (int i = 0; i < 3; ++i) G.row(i) += ctx.active(i, n) * ctx.geo.grad_shape[n].transpose();
    Mat3 F = G + Mat3::Identity();
    double J = F.determinant();
    if (J <= 0.0) throw InadmissibleState(ctx.cell, "non-positive det F");
    Mat3 Finv = F.inverse();

    const auto& rule = volume_rule(ctx.dim());
    for (const auto& q : rule.points) {
      auto lam = lambdas(q);
      Vec3 E = interp3(st.E, ctx.nodes, ctx.n_cell_nodes(), lam);
      Vec3 B = interp3(st.B, ctx.nodes, ctx.n_cell_nodes(), lam);
      double Tq = interp1(st.T, ctx.nodes, ctx.n_cell_nodes(), lam);

      Mat3 N;
      Vec3 P = Vec3::Zero(), M = Vec3::Zero();
      if (rm->kind == RegionMaterial::Kind::Linear) {
        StateSample s;
        s.T = Tq;
        s.set_gradu(G);
        s.E = E;
        s.B = B;
        LinearResponse lr = eval_linear(rm->lin, s);
        N = lr.N;
        P = lr.P;
        M = lr.M;
      } else {
        auto mr = eval_magnetohyperelastic(rm->mhe, F, B);
        N = mr.N;
        M = mr.M;
      }
      Mat3 sigma = cauchy_stress(N, F, J, P, E, M, B);
      Mat3 piola = J * Finv * sigma;  // piola(k,i)

      Vec3 fem = em_force_density(interp1(st.q_total, ctx.nodes, ctx.n_cell_nodes(), lam), E,
                                  interp3(st.Jtot, ctx.nodes, ctx.n_cell_nodes(), lam), B,
                                  interp3(st.P, ctx.nodes, ctx.n_cell_nodes(), lam),
                                  interp3(st.P0, ctx.nodes, ctx.n_cell_nodes(), lam),
                                  interp3(st.dBdt, ctx.nodes, ctx.n_cell_nodes(), lam), dt, J);

      const double wv = q.weight * ctx.geo.volume;
      for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
        for (int i = 0; i < 3; ++i) {
          double val = 0.0;
          if (!opts.static_mode) {
            double acc = 0.0;
            for (int m = 0; m < ctx.n_cell_nodes(); ++m) {
              int mid = ctx.nodes[m];
              acc += lam[m] * (ctx.active(i, m) - 2.0 * st.u.coeffs0[3 * mid + i] +
                               st.u.coeffs00[3 * mid + i]);
            }
            val += rho0 * acc / (dt * dt) * lam[n];
          }
          for (int k = 0; k < 3; ++k) val += piola(k, i) * ctx.geo.grad_shape[n][k];
          val -= scale * (rho0 * opts.body_force[i] + fem[i]) * lam[n];
          r[3 * n + i] += wv * val;
        }
      }
    }
  };

  auto make_traction_kernel = [&](const TractionLoad& load) {
    return [&, value = load.value](const ElemCtx& ctx, const FacetCtx& fc, Eigen::VectorXd& r) {
      const auto& rule = facet_rule(ctx.dim());
      for (const auto& q : rule.points) {
        auto lam = fc.cell_lambda(q, ctx.dim());
        Vec3 x = Vec3::Zero();
        for (int n = 0; n < ctx.n_cell_nodes(); ++n) x += lam[n] * ctx.mesh->nodes[ctx.nodes[n]];
        Vec3 t = value(x);
        for (int n = 0; n < ctx.n_cell_nodes(); ++n)
          for (int i = 0; i < 3; ++i)
            r[3 * n + i] -= q.weight * fc.area * scale * t[i] * lam[n];
      }
    };
  };

  std::vector<FacetJob> jobs;
  for (const TractionLoad& load : tractions)
    if (!load.facets.empty()) jobs.push_back({load.facets, make_traction_kernel(load)});
  return assemble(*st.mesh, st.u, kernel, jobs, bc);
}

SparseSystem residual_T(const TMState& st, const MaterialSet& mats,
                        const std::vector<ConvectionLoad>& convection, const TMOptions& opts,
                        const DirichletBC& bc) {
  const double dt = opts.dt;

  auto kernel = [&](const ElemCtx& ctx, Eigen::VectorXd& r) {
    const RegionMaterial* rm = mats.find(ctx.region);
    if (!rm || !rm->is_material())
      throw std::runtime_error("residual_T: cell " + std::to_string(ctx.cell) +
                               " has no material assigned");
    const double rho0 = rm->rho0();

    Mat3 G = grad_from_coeffs(st.u.coeffs, ctx);
    Mat3 G0 = grad_from_coeffs(st.u.coeffs0, ctx);
    Mat3 F = G + Mat3::Identity();
    double J = F.determinant();
    if (J <= 0.0) throw InadmissibleState(ctx.cell, "non-positive det F");

    Vec3 gradT = ctx.gradient().row(0);

    const auto& rule = volume_rule(ctx.dim());
    for (const auto& q : rule.points) {
      auto lam = lambdas(q);
      double Tq = ctx.value(q)[0];
      if (Tq <= 0.0) throw InadmissibleState(ctx.cell, "non-positive temperature");
      double T0 = 0.0;
      for (int n = 0; n < ctx.n_cell_nodes(); ++n) T0 += lam[n] * st.T.coeffs0[ctx.nodes[n]];

      Vec3 E = interp3(st.E, ctx.nodes, ctx.n_cell_nodes(), lam);
      Vec3 B = interp3(st.B, ctx.nodes, ctx.n_cell_nodes(), lam);
      Vec3 v = Vec3::Zero();
      if (!opts.static_mode)
        for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
          int id = ctx.nodes[n];
          for (int k = 0; k < 3; ++k)
            v[k] += lam[n] * (st.u.coeffs[3 * id + k] - st.u.coeffs0[3 * id + k]) / dt;
        }
      Vec3 Escr = E + v.cross(B);

      double eta = eta_of(*rm, Tq, G, E, B);
      double eta0;
      {
        Vec3 E0 = interp3(st.E0, ctx.nodes, ctx.n_cell_nodes(), lam);
        Vec3 B0 = interp3(st.B0, ctx.nodes, ctx.n_cell_nodes(), lam);
        eta0 = eta_of(*rm, T0, G0, E0, B0);
      }

      Vec3 Q, Jfr;
      if (rm->kind == RegionMaterial::Kind::Linear) {
        Fluxes fl = eval_fluxes(rm->lin, gradT, Escr, J, Tq);
        Q = fl.Q;
        Jfr = fl.Jfr;
      } else {
        Q = -rm->mhe.kappa * gradT;
        Jfr = Vec3::Zero();
      }

      const double wv = q.weight * ctx.geo.volume;
      double joule = (J / Tq) * Escr.dot(Jfr);
      for (int n = 0; n < ctx.n_cell_nodes(); ++n) {
        double val = 0.0;
        if (!opts.static_mode) val += rho0 * (eta - eta0) * lam[n];
        val -= dt * rho0 * (opts.radiant_heat / Tq) * lam[n];
        val += dt * (Q.dot(gradT) / (Tq * Tq)) * lam[n];
        val -= dt * joule * lam[n];
        double flux = -dt * Q.dot(ctx.geo.grad_shape[n]) / Tq;
        r[n] += wv * (val + flux);
      }
    }
  };

  auto make_conv_kernel = [&](const ConvectionLoad& load) {
    return [&, h = load.h, Tref = load.T_ref](const ElemCtx& ctx, const FacetCtx& fc,
                                              Eigen::VectorXd& r) {
      const auto& rule = facet_rule(ctx.dim());
      for (const auto& q : rule.points) {
        auto lam = fc.cell_lambda(q, ctx.dim());
        double Tq = 0.0;
        for (int n = 0; n < ctx.n_cell_nodes(); ++n) Tq += lam[n] * ctx.active(0, n);
        if (Tq <= 0.0) throw InadmissibleState(ctx.cell, "non-positive temperature on facet");
        double val = dt * h * (Tq - Tref) / Tq;
        for (int n = 0; n < ctx.n_cell_nodes(); ++n)
          r[n] += q.weight * fc.area * val * lam[n];
      }
    };
  };

  std::vector<FacetJob> jobs;
  for (const ConvectionLoad& load : convection)
    if (!load.facets.empty() && load.h != 0.0) jobs.push_back({load.facets, make_conv_kernel(load)});
  return assemble(*st.mesh, st.T, kernel, jobs, bc);
}

NewtonReport solve_displacement(TMState& st, const MaterialSet& mats,
                                const std::vector<TractionLoad>& tractions, TMOptions opts,
                                const DirichletBC& bc) {
  return newton_solve([&]() { return residual_u(st, mats, tractions, opts, bc); }, st.u,
                      opts.newton);
}

NewtonReport solve_temperature(TMState& st, const MaterialSet& mats,
                               const std::vector<ConvectionLoad>& convection,
                               const TMOptions& opts, const DirichletBC& bc) {
  return newton_solve([&]() { return residual_T(st, mats, convection, opts, bc); }, st.T,
                      opts.newton);
}

NewtonReport static_preload(TMState& st, const MaterialSet& mats,
                            const std::vector<TractionLoad>& tractions, TMOptions opts,
                            const DirichletBC& bc) {
  opts.static_mode = true;
  NewtonReport last;
  int n = std::max(opts.ramp_increments, 1);
  for (int k = 1; k <= n; ++k) {
    opts.load_scale = static_cast<double>(k) / n;
    last = solve_displacement(st, mats, tractions, opts, bc);
  }
  return last;
}

}  // namespace emsi
