#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace flowtopo {

/// Method of moving asymptotes, dual interior-point subproblem solver.
/// Handles a handful of constraints over many variables.
struct MmaOptions {
    double a0 = 1.0;
    double ai = 0.0;
    double ci = 1000.0;
    double di = 1.0;
    double asyinit = 0.5;
    double asyincr = 1.2;
    double asydecr = 0.7;
    double albefa = 0.1;
    double raa0 = 1e-5;
    double epsimin = 1e-9;
};

struct MmaResult {
    Eigen::VectorXd x;
    double kkt_residual = 0.0; ///< final subproblem interior-point residual norm
};

class Mma {
public:
    Mma(int n, int m, MmaOptions opt = {}) : n_(n), m_(m), opt_(opt) {
        if (n < 1 || m < 1) throw std::invalid_argument("mma: need n >= 1, m >= 1");
        low_.resize(n);
        upp_.resize(n);
        xold1_.resize(n);
        xold2_.resize(n);
    }

    int iteration() const { return iter_; }
    const Eigen::VectorXd& lower_asymptote() const { return low_; }
    const Eigen::VectorXd& upper_asymptote() const { return upp_; }

    /// One design update.  dfdx is m x n (one gradient row per constraint).
    MmaResult update(const Eigen::VectorXd& x, const Eigen::VectorXd& xmin,
                     const Eigen::VectorXd& xmax, double f0,
                     const Eigen::VectorXd& df0dx, const Eigen::VectorXd& fval,
                     const Eigen::MatrixXd& dfdx) {
        (void)f0;
        if (x.size() != n_ || xmin.size() != n_ || xmax.size() != n_ ||
            df0dx.size() != n_ || fval.size() != m_ || dfdx.rows() != m_ ||
            dfdx.cols() != n_)
            throw std::invalid_argument("mma: inconsistent dimensions");
        ++iter_;

        using Arr = Eigen::ArrayXd;
        const Arr xval = x.array(), xmn = xmin.array(), xmx = xmax.array();

        if (iter_ <= 2) {
            low_ = (xval - opt_.asyinit * (xmx - xmn)).matrix();
            upp_ = (xval + opt_.asyinit * (xmx - xmn)).matrix();
        } else {
            Arr zzz = (xval - xold1_.array()) * (xold1_.array() - xold2_.array());
            Arr factor = Arr::Ones(n_);
            factor = (zzz > 0.0).select(opt_.asyincr, factor);
            factor = (zzz < 0.0).select(opt_.asydecr, factor);
            Arr low = xval - factor * (xold1_.array() - low_.array());
            Arr upp = xval + factor * (upp_.array() - xold1_.array());
            low = low.max(xval - 10.0 * (xmx - xmn)).min(xval - 0.01 * (xmx - xmn));
            upp = upp.min(xval + 10.0 * (xmx - xmn)).max(xval + 0.01 * (xmx - xmn));
            low_ = low.matrix();
            upp_ = upp.matrix();
        }
        xold2_ = xold1_;
        xold1_ = x;

        const Arr low = low_.array(), upp = upp_.array();
        const Arr alfa = (low + opt_.albefa * (xval - low)).max(xmn);
        const Arr beta = (upp - opt_.albefa * (upp - xval)).min(xmx);

        const Arr xmami = (xmx - xmn).max(1e-5);
        const Arr ux2 = (upp - xval).square();
        const Arr xl2 = (xval - low).square();

        Arr p0 = df0dx.array().max(0.0);
        Arr q0 = (-df0dx.array()).max(0.0);
        const Arr pq0 = 0.001 * (p0 + q0) + opt_.raa0 / xmami;
        p0 = (p0 + pq0) * ux2;
        q0 = (q0 + pq0) * xl2;

        Eigen::MatrixXd P(m_, n_), Q(m_, n_);
        for (int i = 0; i < m_; ++i) {
            Arr pi = dfdx.row(i).array().max(0.0);
            Arr qi = (-dfdx.row(i).array()).max(0.0);
            const Arr pqi = 0.001 * (pi + qi) + opt_.raa0 / xmami;
            P.row(i) = ((pi + pqi) * ux2).matrix().transpose();
            Q.row(i) = ((qi + pqi) * xl2).matrix().transpose();
        }
        const Eigen::VectorXd b =
            P * (upp - xval).inverse().matrix() + Q * (xval - low).inverse().matrix() -
            fval;

        return subsolve(alfa, beta, p0, q0, P, Q, b);
    }

private:
    MmaResult subsolve(const Eigen::ArrayXd& alfa, const Eigen::ArrayXd& beta,
                       const Eigen::ArrayXd& p0, const Eigen::ArrayXd& q0,
                       const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q,
                       const Eigen::VectorXd& b) const {
        using Arr = Eigen::ArrayXd;
        const int n = n_, m = m_;
        const Arr low = low_.array(), upp = upp_.array();
        const Arr a = Arr::Constant(m, opt_.ai);
        const Arr c = Arr::Constant(m, opt_.ci);
        const Arr d = Arr::Constant(m, opt_.di);
        const double a0 = opt_.a0;

        double epsi = 1.0;
        Arr x = 0.5 * (alfa + beta);
        Arr y = Arr::Ones(m);
        double z = 1.0;
        Arr lam = Arr::Ones(m);
        Arr xsi = (1.0 / (x - alfa)).max(1.0);
        Arr eta = (1.0 / (beta - x)).max(1.0);
        Arr mu = (0.5 * c).max(1.0);
        double zet = 1.0;
        Arr s = Arr::Ones(m);

        double residunorm = 0.0, residumax = 0.0;
        auto residuals = [&](const Arr& x_, const Arr& y_, double z_, const Arr& lam_,
                             const Arr& xsi_, const Arr& eta_, const Arr& mu_,
                             double zet_, const Arr& s_, double eps, double& rnorm,
                             double& rmax) {
            const Arr ux1 = upp - x_, xl1 = x_ - low;
            const Arr plam = p0 + (P.transpose() * lam_.matrix()).array();
            const Arr qlam = q0 + (Q.transpose() * lam_.matrix()).array();
            const Arr gvec = (P * ux1.inverse().matrix()).array() +
                             (Q * xl1.inverse().matrix()).array();
            const Arr dpsidx = plam / ux1.square() - qlam / xl1.square();

            const Arr rex = dpsidx - xsi_ + eta_;
            const Arr rey = c + d * y_ - mu_ - lam_;
            const double rez = a0 - zet_ - (a * lam_).sum();
            const Arr relam = gvec - a * z_ - y_ + s_ - b.array();
            const Arr rexsi = xsi_ * (x_ - alfa) - eps;
            const Arr reeta = eta_ * (beta - x_) - eps;
            const Arr remu = mu_ * y_ - eps;
            const double rezet = zet_ * z_ - eps;
            const Arr res = lam_ * s_ - eps;

            double sq = rex.square().sum() + rey.square().sum() + rez * rez +
                        relam.square().sum() + rexsi.square().sum() +
                        reeta.square().sum() + remu.square().sum() + rezet * rezet +
                        res.square().sum();
            rnorm = std::sqrt(sq);
            rmax = std::max({rex.abs().maxCoeff(), rey.abs().maxCoeff(),
                             std::abs(rez), relam.abs().maxCoeff(),
                             rexsi.abs().maxCoeff(), reeta.abs().maxCoeff(),
                             remu.abs().maxCoeff(), std::abs(rezet),
                             res.abs().maxCoeff()});
        };
        residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi, residunorm, residumax);

        while (epsi > opt_.epsimin) {
            int ittt = 0;
            while (residumax > 0.9 * epsi && ittt < 200) {
                ++ittt;
                const Arr ux1 = upp - x, xl1 = x - low;
                const Arr ux2 = ux1.square(), xl2 = xl1.square();
                const Arr ux3 = ux1 * ux2, xl3 = xl1 * xl2;
                const Arr plam = p0 + (P.transpose() * lam.matrix()).array();
                const Arr qlam = q0 + (Q.transpose() * lam.matrix()).array();
                const Arr gvec = (P * ux1.inverse().matrix()).array() +
                                 (Q * xl1.inverse().matrix()).array();
                Eigen::MatrixXd GG(m, n);
                for (int i = 0; i < m; ++i)
                    GG.row(i) = (P.row(i).transpose().array() / ux2 -
                                 Q.row(i).transpose().array() / xl2)
                                    .matrix()
                                    .transpose();
                const Arr dpsidx = plam / ux2 - qlam / xl2;
                const Arr delx = dpsidx - epsi / (x - alfa) + epsi / (beta - x);
                const Arr dely = c + d * y - lam - epsi / y;
                const double delz = a0 - (a * lam).sum() - epsi / z;
                const Arr dellam = gvec - a * z - y - b.array() + epsi / lam;
                Arr diagx = plam / ux3 + qlam / xl3;
                diagx = 2.0 * diagx + xsi / (x - alfa) + eta / (beta - x);
                const Arr diagy = d + mu / y;
                const Arr diaglamyi = s / lam + diagy.inverse();

                // Condense on (lam, z); n is large, m small.
                Eigen::VectorXd blam =
                    (dellam + dely / diagy).matrix() - GG * (delx / diagx).matrix();
                Eigen::MatrixXd AA(m + 1, m + 1);
                AA.topLeftCorner(m, m) =
                    Eigen::MatrixXd(diaglamyi.matrix().asDiagonal()) +
                    GG * diagx.inverse().matrix().asDiagonal() * GG.transpose();
                AA.topRightCorner(m, 1) = a.matrix();
                AA.bottomLeftCorner(1, m) = a.matrix().transpose();
                AA(m, m) = -zet / z;
                Eigen::VectorXd bb(m + 1);
                bb.head(m) = blam;
                bb(m) = delz;
                const Eigen::VectorXd solut = AA.fullPivLu().solve(bb);
                const Arr dlam = solut.head(m).array();
                const double dz = solut(m);
                const Arr dx =
                    -delx / diagx - (GG.transpose() * dlam.matrix()).array() / diagx;
                const Arr dy = -dely / diagy + dlam / diagy;
                const Arr dxsi = -xsi + epsi / (x - alfa) - (xsi * dx) / (x - alfa);
                const Arr deta = -eta + epsi / (beta - x) + (eta * dx) / (beta - x);
                const Arr dmu = -mu + epsi / y - (mu * dy) / y;
                const double dzet = -zet + epsi / z - zet * dz / z;
                const Arr ds = -s + epsi / lam - (s * dlam) / lam;

                double stmxx = (-1.01 * dy / y).maxCoeff();
                stmxx = std::max(stmxx, -1.01 * dz / z);
                stmxx = std::max(stmxx, (-1.01 * dlam / lam).maxCoeff());
                stmxx = std::max(stmxx, (-1.01 * dxsi / xsi).maxCoeff());
                stmxx = std::max(stmxx, (-1.01 * deta / eta).maxCoeff());
                stmxx = std::max(stmxx, (-1.01 * dmu / mu).maxCoeff());
                stmxx = std::max(stmxx, -1.01 * dzet / zet);
                stmxx = std::max(stmxx, (-1.01 * ds / s).maxCoeff());
                const double stmalfa = (-1.01 * dx / (x - alfa)).maxCoeff();
                const double stmbeta = (1.01 * dx / (beta - x)).maxCoeff();
                const double stminv = std::max({stmalfa, stmbeta, stmxx, 1.0});
                double steg = 1.0 / stminv;

                const Arr xold = x, yold = y, lamold = lam, xsiold = xsi,
                          etaold = eta, muold = mu, sold = s;
                const double zold = z, zetold = zet;
                double resinew = 2.0 * residunorm;
                int itto = 0;
                while (resinew > residunorm && itto < 50) {
                    ++itto;
                    x = xold + steg * dx;
                    y = yold + steg * dy;
                    z = zold + steg * dz;
                    lam = lamold + steg * dlam;
                    xsi = xsiold + steg * dxsi;
                    eta = etaold + steg * deta;
                    mu = muold + steg * dmu;
                    zet = zetold + steg * dzet;
                    s = sold + steg * ds;
                    double rmax;
                    residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi, resinew, rmax);
                    residumax = rmax;
                    steg *= 0.5;
                }
                residunorm = resinew;
            }
            epsi *= 0.1;
            residuals(x, y, z, lam, xsi, eta, mu, zet, s, epsi, residunorm, residumax);
        }

        MmaResult out;
        out.x = x.matrix();
        // True stationarity/feasibility/complementarity, no barrier shift.
        double rnorm0, rmax0;
        residuals(x, y, z, lam, xsi, eta, mu, zet, s, 0.0, rnorm0, rmax0);
        out.kkt_residual = rmax0;
        return out;
    }

    int n_, m_;
    MmaOptions opt_;
    int iter_ = 0;
    Eigen::VectorXd low_, upp_, xold1_, xold2_;
};

} // namespace flowtopo
