#include "sldo/spectra.hpp"

#include "sldo/csv.hpp"
#include "sldo/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace sldo {

Eigen::MatrixXd balance(const Eigen::MatrixXd& in) {
    Eigen::MatrixXd a = in;
    const Eigen::Index n = a.rows();
    constexpr double radix = 2.0;
    bool done = false;
    while (!done) {
        done = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = 0.0, r = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
    return a;
}

namespace {

void sort_spectrum(std::vector<std::complex<double>>& ev) {
    std::sort(ev.begin(), ev.end(), [](const auto& x, const auto& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
}

}  // namespace

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& a, std::size_t cap) {
    if (a.rows() != a.cols()) throw DimensionError("eigenvalues: matrix is not square");
    if (static_cast<std::size_t>(a.rows()) > cap)
        throw SpectralError("eigenvalues: n = " + std::to_string(a.rows()) + " exceeds the dense cap " +
                            std::to_string(cap));
    if (!a.allFinite()) throw SpectralError("eigenvalues: matrix has non-finite entries");
    std::vector<std::complex<double>> ev;
    if (a.rows() == 0) return ev;
    Eigen::EigenSolver<Eigen::MatrixXd> es(balance(a), false);
    if (es.info() != Eigen::Success) throw SpectralError("eigenvalues: QR iteration did not converge");
    const auto& v = es.eigenvalues();
    ev.assign(v.data(), v.data() + v.size());
    sort_spectrum(ev);
    return ev;
}

std::vector<Disc> gershgorin_discs(const Eigen::MatrixXd& a) {
    std::vector<Disc> d(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        d[static_cast<std::size_t>(i)].center = a(i, i);
        d[static_cast<std::size_t>(i)].radius = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
    }
    return d;
}

std::vector<Disc> gershgorin_discs(const AssembledOperator& a) {
    // Accumulate per column first so aliased offsets on small grids combine like dense().
    std::vector<Disc> d(a.n());
    std::vector<double> acc(a.n(), 0.0);
    std::vector<char> mark(a.n(), 0);
    std::vector<std::size_t> touched;
    const Lattice& lat = a.lattice();
    for (std::size_t i = 0; i < a.n(); ++i) {
        const LocalOperator& r = a.row(i);
        touched.clear();
        for (std::size_t k = 0; k < r.coeffs.size(); ++k) {
            const std::size_t j = lat.wrap(i, r.stencil.offsets()[k]);
            if (!mark[j]) {
                mark[j] = 1;
                touched.push_back(j);
            }
            acc[j] += r.coeffs[k];
        }
        double radius = 0.0;
        for (std::size_t j : touched) {
            if (j == i)
                d[i].center = acc[j];
            else
                radius += std::abs(acc[j]);
            acc[j] = 0.0;
            mark[j] = 0;
        }
        d[i].radius = radius;
    }
    return d;
}

SpectralReport stability_report(const Eigen::MatrixXd& a, double tol, std::size_t cap) {
    SpectralReport r;
    r.tol = tol;
    r.eigenvalues = eigenvalues(a, cap);
    r.discs = gershgorin_discs(a);
    r.max_real_part_neg_op = -std::numeric_limits<double>::infinity();
    for (const auto& l : r.eigenvalues) r.max_real_part_neg_op = std::max(r.max_real_part_neg_op, -l.real());
    if (r.eigenvalues.empty()) r.max_real_part_neg_op = 0.0;
    r.stable = r.max_real_part_neg_op <= tol;
    return r;
}

SpectralReport stability_report(const AssembledOperator& a, double tol, std::size_t cap) {
    if (a.n() > cap)
        throw SpectralError("stability_report: n = " + std::to_string(a.n()) + " exceeds the dense cap " +
                            std::to_string(cap));
    SpectralReport r = stability_report(a.dense(), tol, cap);
    r.discs = gershgorin_discs(a);
    return r;
}

SpectralReport disc_report(const AssembledOperator& a, double tol) {
    SpectralReport r;
    r.tol = tol;
    r.discs = gershgorin_discs(a);
    r.max_real_part_neg_op = -std::numeric_limits<double>::infinity();
    for (const auto& d : r.discs) r.max_real_part_neg_op = std::max(r.max_real_part_neg_op, d.radius - d.center);
    if (r.discs.empty()) r.max_real_part_neg_op = 0.0;
    r.stable = r.max_real_part_neg_op <= tol;
    return r;
}

void write_eigenvalues_csv(std::ostream& os, const std::vector<std::complex<double>>& ev) {
    os << "re,im\n";
    for (const auto& l : ev) os << format_double(l.real()) << ',' << format_double(l.imag()) << '\n';
}

std::vector<std::complex<double>> read_eigenvalues_csv(std::istream& is) {
    const CsvTable t = read_csv(is);
    const std::size_t re = t.column("re"), im = t.column("im");
    std::vector<std::complex<double>> ev;
    ev.reserve(t.rows.size());
    for (const auto& r : t.rows) ev.emplace_back(parse_double(r[re]), parse_double(r[im]));
    return ev;
}

}  // namespace sldo
