#ifndef PNF_PERIODIC_MATRIX_HPP
#define PNF_PERIODIC_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include <pnf/error.hpp>
#include <pnf/periodic.hpp>

namespace pnf
{

/// n×n matrix whose entries are periodic functions of θ, stored node by node.
class PeriodicMatrix
{
public:
    PeriodicMatrix(std::size_t n, std::size_t grid) : m_n(n), m_grid(grid), m_nodes(grid, Eigen::MatrixXd::Zero(n, n))
    {
        if (grid < 4 || !detail::is_power_of_two(grid)) {
            raise(ErrorKind::InvalidArgument, "grid size must be a power of two >= 4");
        }
    }

    static PeriodicMatrix identity(std::size_t n, std::size_t grid)
    {
        return constant(Eigen::MatrixXd::Identity(n, n), grid);
    }

    static PeriodicMatrix constant(const Eigen::MatrixXd &a, std::size_t grid)
    {
        PeriodicMatrix g(static_cast<std::size_t>(a.rows()), grid);
        for (auto &node : g.m_nodes) {
            node = a;
        }
        return g;
    }

    static PeriodicMatrix from_nodes(std::vector<Eigen::MatrixXd> nodes)
    {
        PeriodicMatrix g(static_cast<std::size_t>(nodes.at(0).rows()), nodes.size());
        g.m_nodes = std::move(nodes);
        return g;
    }

    static PeriodicMatrix diagonal(const std::vector<PeriodicFn> &d)
    {
        PeriodicMatrix g(d.size(), d.at(0).size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            g.set(i, i, d[i]);
        }
        return g;
    }

    std::size_t dim() const noexcept
    {
        return m_n;
    }
    std::size_t grid() const noexcept
    {
        return m_grid;
    }

    const Eigen::MatrixXd &at(std::size_t m) const
    {
        return m_nodes[m];
    }

    PeriodicFn entry(std::size_t i, std::size_t j) const
    {
        std::vector<double> s(m_grid);
        for (std::size_t m = 0; m < m_grid; ++m) {
            s[m] = m_nodes[m](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        return PeriodicFn(std::move(s));
    }

    void set(std::size_t i, std::size_t j, const PeriodicFn &f)
    {
        if (f.size() != m_grid) {
            raise(ErrorKind::DimensionMismatch, "matrix entry grid mismatch");
        }
        for (std::size_t m = 0; m < m_grid; ++m) {
            m_nodes[m](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[m];
        }
    }

    /// Node-wise inverse; fails if the matrix is singular (relative to its scale) at some node.
    PeriodicMatrix inverse() const
    {
        PeriodicMatrix out(m_n, m_grid);
        for (std::size_t m = 0; m < m_grid; ++m) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(m_nodes[m]);
            lu.setThreshold(1e-12);
            if (!lu.isInvertible()) {
                raise(ErrorKind::NonInvertibleLinearPart,
                      "matrix is singular at node " + std::to_string(m));
            }
            out.m_nodes[m] = lu.inverse();
        }
        return out;
    }

    friend PeriodicMatrix operator*(const PeriodicMatrix &a, const PeriodicMatrix &b)
    {
        PeriodicMatrix out(a.m_n, a.m_grid);
        for (std::size_t m = 0; m < a.m_grid; ++m) {
            out.m_nodes[m] = a.m_nodes[m] * b.m_nodes[m];
        }
        return out;
    }

    /// max over nodes of the largest entry deviation from a constant matrix.
    double max_deviation(const Eigen::MatrixXd &a) const
    {
        double r = 0;
        for (const auto &node : m_nodes) {
            r = std::max(r, (node - a).cwiseAbs().maxCoeff());
        }
        return r;
    }

private:
    std::size_t m_n;
    std::size_t m_grid;
    std::vector<Eigen::MatrixXd> m_nodes;
};

} // namespace pnf

#endif
