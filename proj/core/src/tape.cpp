#include "chronoqa/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace chronoqa {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

int Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size() - 1);
}

Tensor& Tape::adj(int idx) {
    Node& n = nodes_[idx];
    if (!n.adjoint_ready) {
        const Tensor& v = n.val();
        n.adjoint = Tensor(v.rows(), v.cols());
        n.adjoint_ready = true;
    }
    return n.adjoint;
}

const Tensor& Tape::value(Var v) const { return nodes_[v.idx].val(); }

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_[v.idx];
    if (!n.adjoint_ready) {
        throw ContractError("tape: gradient not populated; call backward() first");
    }
    return n.adjoint;
}

Var Tape::param(Param& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{it->second};
    Node n;
    n.external = &p.value;
    n.bound = &p;
    const int idx = push(std::move(n));
    param_nodes_[&p] = idx;
    return Var{idx};
}

Var Tape::constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    return Var{push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
    const Tensor& x = val(a.idx);
    const Tensor& y = val(b.idx);
    check_same_shape("add", x, y);
    Node n;
    n.owned = x;
    n.owned.add_in_place(y);
    n.back = [ai = a.idx, bi = b.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        t.adj(ai).add_in_place(g);
        t.adj(bi).add_in_place(g);
    };
    return Var{push(std::move(n))};
}

Var Tape::add_colvec(Var x, Var v) {
    const Tensor& xv = val(x.idx);
    const Tensor& vv = val(v.idx);
    if (vv.cols() != 1 || vv.rows() != xv.rows()) {
        throw DimensionError("add_colvec: shapes " + xv.shape_str() + " and " + vv.shape_str());
    }
    Node n;
    n.owned = xv;
    for (int r = 0; r < xv.rows(); ++r) {
        const double b = vv.at(r, 0);
        for (int c = 0; c < xv.cols(); ++c) n.owned.at(r, c) += b;
    }
    n.back = [xi = x.idx, vi = v.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        t.adj(xi).add_in_place(g);
        Tensor& gv = t.adj(vi);
        for (int r = 0; r < g.rows(); ++r) {
            double s = 0.0;
            for (int c = 0; c < g.cols(); ++c) s += g.at(r, c);
            gv.at(r, 0) += s;
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::mul(Var a, Var b) {
    const Tensor& x = val(a.idx);
    const Tensor& y = val(b.idx);
    check_same_shape("mul", x, y);
    Node n;
    n.owned = Tensor(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i) n.owned[i] = x[i] * y[i];
    n.back = [ai = a.idx, bi = b.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        const Tensor& x = t.val(ai);
        const Tensor& y = t.val(bi);
        Tensor& ga = t.adj(ai);
        Tensor& gb = t.adj(bi);
        for (size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * y[i];
            gb[i] += g[i] * x[i];
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::scalar_mul(Var a, double c) {
    const Tensor& x = val(a.idx);
    Node n;
    n.owned = Tensor(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i) n.owned[i] = c * x[i];
    n.back = [ai = a.idx, c](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        Tensor& ga = t.adj(ai);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    };
    return Var{push(std::move(n))};
}

Var Tape::sigmoid(Var a) {
    const Tensor& x = val(a.idx);
    Node n;
    n.owned = Tensor(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i) n.owned[i] = stable_sigmoid(x[i]);
    n.back = [ai = a.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        const Tensor& y = t.nodes_[self].val();
        Tensor& ga = t.adj(ai);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    };
    return Var{push(std::move(n))};
}

Var Tape::gelu(Var a) {
    const Tensor& x = val(a.idx);
    Node n;
    n.owned = Tensor(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
        n.owned[i] = x[i] * cdf;
    }
    n.back = [ai = a.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        const Tensor& x = t.val(ai);
        Tensor& ga = t.adj(ai);
        for (size_t i = 0; i < g.size(); ++i) {
            const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
            ga[i] += g[i] * (cdf + x[i] * pdf);
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& x = val(a.idx);
    const Tensor& y = val(b.idx);
    if (x.cols() != y.rows()) {
        throw DimensionError("matmul: shapes " + x.shape_str() + " and " + y.shape_str());
    }
    const int m = x.rows(), k = x.cols(), p = y.cols();
    Node n;
    n.owned = Tensor(m, p);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) {
            const double xv = x.at(i, j);
            if (xv == 0.0) continue;
            const double* yr = y.data() + static_cast<size_t>(j) * p;
            double* out = n.owned.data() + static_cast<size_t>(i) * p;
            for (int c = 0; c < p; ++c) out[c] += xv * yr[c];
        }
    }
    n.back = [ai = a.idx, bi = b.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        const Tensor& x = t.val(ai);
        const Tensor& y = t.val(bi);
        Tensor& ga = t.adj(ai);
        Tensor& gb = t.adj(bi);
        const int m = x.rows(), k = x.cols(), p = y.cols();
        // ga += g * y^T
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < k; ++j) {
                const double* gr = g.data() + static_cast<size_t>(i) * p;
                const double* yr = y.data() + static_cast<size_t>(j) * p;
                double s = 0.0;
                for (int c = 0; c < p; ++c) s += gr[c] * yr[c];
                ga.at(i, j) += s;
            }
        }
        // gb += x^T * g
        for (int i = 0; i < m; ++i) {
            const double* gr = g.data() + static_cast<size_t>(i) * p;
            for (int j = 0; j < k; ++j) {
                const double xv = x.at(i, j);
                if (xv == 0.0) continue;
                double* br = gb.data() + static_cast<size_t>(j) * p;
                for (int c = 0; c < p; ++c) br[c] += xv * gr[c];
            }
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::transpose(Var a) {
    const Tensor& x = val(a.idx);
    Node n;
    n.owned = Tensor(x.cols(), x.rows());
    for (int r = 0; r < x.rows(); ++r) {
        for (int c = 0; c < x.cols(); ++c) n.owned.at(c, r) = x.at(r, c);
    }
    n.back = [ai = a.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        Tensor& ga = t.adj(ai);
        for (int r = 0; r < g.rows(); ++r) {
            for (int c = 0; c < g.cols(); ++c) ga.at(c, r) += g.at(r, c);
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::gather_rows(Var table, const std::vector<int>& rows) {
    const Tensor& x = val(table.idx);
    if (rows.empty()) throw ContractError("gather_rows: empty index list");
    for (int r : rows) {
        if (r < 0 || r >= x.rows()) {
            throw LookupError("gather_rows: row " + std::to_string(r) + " out of range for " +
                              x.shape_str());
        }
    }
    Node n;
    n.owned = Tensor(static_cast<int>(rows.size()), x.cols());
    for (size_t i = 0; i < rows.size(); ++i) {
        const double* src = x.data() + static_cast<size_t>(rows[i]) * x.cols();
        double* dst = n.owned.data() + i * x.cols();
        std::copy(src, src + x.cols(), dst);
    }
    n.back = [ti = table.idx, rows](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        Tensor& gt = t.adj(ti);
        for (size_t i = 0; i < rows.size(); ++i) {
            const double* src = g.data() + i * g.cols();
            double* dst = gt.data() + static_cast<size_t>(rows[i]) * g.cols();
            for (int c = 0; c < g.cols(); ++c) dst[c] += src[c];
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    const int cols = val(parts[0].idx).cols();
    int rows = 0;
    for (Var p : parts) {
        const Tensor& x = val(p.idx);
        if (x.cols() != cols) {
            throw DimensionError("concat_rows: column mismatch " + x.shape_str());
        }
        rows += x.rows();
    }
    Node n;
    n.owned = Tensor(rows, cols);
    std::vector<int> offsets;
    int off = 0;
    for (Var p : parts) {
        const Tensor& x = val(p.idx);
        offsets.push_back(off);
        std::copy(x.data(), x.data() + x.size(), n.owned.data() + static_cast<size_t>(off) * cols);
        off += x.rows();
    }
    std::vector<int> part_ids;
    part_ids.reserve(parts.size());
    for (Var p : parts) part_ids.push_back(p.idx);
    n.back = [part_ids, offsets](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        for (size_t i = 0; i < part_ids.size(); ++i) {
            Tensor& gp = t.adj(part_ids[i]);
            const double* src = g.data() + static_cast<size_t>(offsets[i]) * g.cols();
            for (size_t k = 0; k < gp.size(); ++k) gp[k] += src[k];
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const int rows = val(parts[0].idx).rows();
    int cols = 0;
    for (Var p : parts) {
        const Tensor& x = val(p.idx);
        if (x.rows() != rows) {
            throw DimensionError("concat_cols: row mismatch " + x.shape_str());
        }
        cols += x.cols();
    }
    Node n;
    n.owned = Tensor(rows, cols);
    std::vector<int> offsets;
    int off = 0;
    for (Var p : parts) {
        const Tensor& x = val(p.idx);
        offsets.push_back(off);
        for (int r = 0; r < rows; ++r) {
            std::copy(x.data() + static_cast<size_t>(r) * x.cols(),
                      x.data() + static_cast<size_t>(r + 1) * x.cols(),
                      n.owned.data() + static_cast<size_t>(r) * cols + off);
        }
        off += x.cols();
    }
    std::vector<int> part_ids;
    part_ids.reserve(parts.size());
    for (Var p : parts) part_ids.push_back(p.idx);
    n.back = [part_ids, offsets](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        for (size_t i = 0; i < part_ids.size(); ++i) {
            Tensor& gp = t.adj(part_ids[i]);
            for (int r = 0; r < gp.rows(); ++r) {
                const double* src = g.data() + static_cast<size_t>(r) * g.cols() + offsets[i];
                double* dst = gp.data() + static_cast<size_t>(r) * gp.cols();
                for (int c = 0; c < gp.cols(); ++c) dst[c] += src[c];
            }
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::slice_rows(Var a, int begin, int end) {
    const Tensor& x = val(a.idx);
    if (begin < 0 || end > x.rows() || begin >= end) {
        throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") on " + x.shape_str());
    }
    Node n;
    n.owned = Tensor(end - begin, x.cols());
    std::copy(x.data() + static_cast<size_t>(begin) * x.cols(),
              x.data() + static_cast<size_t>(end) * x.cols(), n.owned.data());
    n.back = [ai = a.idx, begin](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        Tensor& ga = t.adj(ai);
        double* dst = ga.data() + static_cast<size_t>(begin) * ga.cols();
        for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    };
    return Var{push(std::move(n))};
}

Var Tape::slice_cols(Var a, int begin, int end) {
    const Tensor& x = val(a.idx);
    if (begin < 0 || end > x.cols() || begin >= end) {
        throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") on " + x.shape_str());
    }
    Node n;
    n.owned = Tensor(x.rows(), end - begin);
    for (int r = 0; r < x.rows(); ++r) {
        std::copy(x.data() + static_cast<size_t>(r) * x.cols() + begin,
                  x.data() + static_cast<size_t>(r) * x.cols() + end,
                  n.owned.data() + static_cast<size_t>(r) * (end - begin));
    }
    n.back = [ai = a.idx, begin](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        Tensor& ga = t.adj(ai);
        for (int r = 0; r < g.rows(); ++r) {
            double* dst = ga.data() + static_cast<size_t>(r) * ga.cols() + begin;
            const double* src = g.data() + static_cast<size_t>(r) * g.cols();
            for (int c = 0; c < g.cols(); ++c) dst[c] += src[c];
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::sum(Var a) {
    const Tensor& x = val(a.idx);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i];
    Node n;
    n.owned = Tensor::scalar(s);
    n.back = [ai = a.idx](Tape& t, int self) {
        const double g = t.nodes_[self].adjoint[0];
        Tensor& ga = t.adj(ai);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
    return Var{push(std::move(n))};
}

Var Tape::mean(Var a) {
    const Tensor& x = val(a.idx);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i];
    const double inv_n = 1.0 / static_cast<double>(x.size());
    Node n;
    n.owned = Tensor::scalar(s * inv_n);
    n.back = [ai = a.idx, inv_n](Tape& t, int self) {
        const double g = t.nodes_[self].adjoint[0] * inv_n;
        Tensor& ga = t.adj(ai);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
    return Var{push(std::move(n))};
}

Var Tape::softmax_rows(Var a) {
    const Tensor& x = val(a.idx);
    Node n;
    n.owned = Tensor(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
        const double* src = x.data() + static_cast<size_t>(r) * x.cols();
        double* dst = n.owned.data() + static_cast<size_t>(r) * x.cols();
        double mx = src[0];
        for (int c = 1; c < x.cols(); ++c) mx = std::max(mx, src[c]);
        double z = 0.0;
        for (int c = 0; c < x.cols(); ++c) {
            dst[c] = std::exp(src[c] - mx);
            z += dst[c];
        }
        const double inv_z = 1.0 / z;
        for (int c = 0; c < x.cols(); ++c) dst[c] *= inv_z;
    }
    n.back = [ai = a.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        const Tensor& y = t.nodes_[self].val();
        Tensor& ga = t.adj(ai);
        for (int r = 0; r < g.rows(); ++r) {
            const double* gr = g.data() + static_cast<size_t>(r) * g.cols();
            const double* yr = y.data() + static_cast<size_t>(r) * g.cols();
            double dot = 0.0;
            for (int c = 0; c < g.cols(); ++c) dot += gr[c] * yr[c];
            double* dst = ga.data() + static_cast<size_t>(r) * g.cols();
            for (int c = 0; c < g.cols(); ++c) dst[c] += yr[c] * (gr[c] - dot);
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::layer_norm_cols(Var x, Var gain, Var bias) {
    const Tensor& xv = val(x.idx);
    const Tensor& gv = val(gain.idx);
    const Tensor& bv = val(bias.idx);
    const int d = xv.rows();
    if (gv.rows() != d || gv.cols() != 1 || bv.rows() != d || bv.cols() != 1) {
        throw DimensionError("layer_norm_cols: gain/bias must be " + std::to_string(d) + "x1");
    }
    constexpr double kEps = 1e-8;
    Node n;
    n.owned = Tensor(d, xv.cols());
    for (int c = 0; c < xv.cols(); ++c) {
        double mu = 0.0;
        for (int r = 0; r < d; ++r) mu += xv.at(r, c);
        mu /= d;
        double var = 0.0;
        for (int r = 0; r < d; ++r) {
            const double dv = xv.at(r, c) - mu;
            var += dv * dv;
        }
        var /= d;
        const double inv_std = 1.0 / std::sqrt(var + kEps);
        for (int r = 0; r < d; ++r) {
            const double xhat = (xv.at(r, c) - mu) * inv_std;
            n.owned.at(r, c) = gv.at(r, 0) * xhat + bv.at(r, 0);
        }
    }
    n.back = [xi = x.idx, gi = gain.idx, bi = bias.idx](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        const Tensor& xv = t.val(xi);
        const Tensor& gv = t.val(gi);
        Tensor& gx = t.adj(xi);
        Tensor& gg = t.adj(gi);
        Tensor& gb = t.adj(bi);
        const int d = xv.rows();
        constexpr double kEps = 1e-8;
        for (int c = 0; c < xv.cols(); ++c) {
            double mu = 0.0;
            for (int r = 0; r < d; ++r) mu += xv.at(r, c);
            mu /= d;
            double var = 0.0;
            for (int r = 0; r < d; ++r) {
                const double dv = xv.at(r, c) - mu;
                var += dv * dv;
            }
            var /= d;
            const double inv_std = 1.0 / std::sqrt(var + kEps);
            // ghat = g .* gain; dx = inv_std * (ghat - mean(ghat) - xhat * mean(ghat .* xhat))
            double mean_gh = 0.0;
            double mean_ghx = 0.0;
            for (int r = 0; r < d; ++r) {
                const double xhat = (xv.at(r, c) - mu) * inv_std;
                const double gh = g.at(r, c) * gv.at(r, 0);
                mean_gh += gh;
                mean_ghx += gh * xhat;
            }
            mean_gh /= d;
            mean_ghx /= d;
            for (int r = 0; r < d; ++r) {
                const double xhat = (xv.at(r, c) - mu) * inv_std;
                const double gh = g.at(r, c) * gv.at(r, 0);
                gx.at(r, c) += inv_std * (gh - mean_gh - xhat * mean_ghx);
                gg.at(r, 0) += g.at(r, c) * xhat;
                gb.at(r, 0) += g.at(r, c);
            }
        }
    };
    return Var{push(std::move(n))};
}

void Tape::check_vector_pair(const char* op, Var a, Var b) const {
    const Tensor& x = val(a.idx);
    const Tensor& y = val(b.idx);
    check_same_shape(op, x, y);
    if (x.rows() != 1 && x.cols() != 1) {
        throw ContractError(std::string(op) + ": expects a vector, got " + x.shape_str());
    }
    if (x.size() % 2 != 0) {
        throw ContractError(std::string(op) + ": complex layout needs even length, got " +
                            std::to_string(x.size()));
    }
}

Var Tape::complex_mul(Var a, Var b) {
    check_vector_pair("complex_mul", a, b);
    const Tensor& x = val(a.idx);
    const Tensor& y = val(b.idx);
    const size_t h = x.size() / 2;
    Node n;
    n.owned = Tensor(x.rows(), x.cols());
    for (size_t j = 0; j < h; ++j) {
        n.owned[j] = x[j] * y[j] - x[j + h] * y[j + h];
        n.owned[j + h] = x[j] * y[j + h] + x[j + h] * y[j];
    }
    n.back = [ai = a.idx, bi = b.idx, h](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        const Tensor& x = t.val(ai);
        const Tensor& y = t.val(bi);
        Tensor& ga = t.adj(ai);
        Tensor& gb = t.adj(bi);
        for (size_t j = 0; j < h; ++j) {
            const double gr = g[j], gi = g[j + h];
            ga[j] += gr * y[j] + gi * y[j + h];
            ga[j + h] += -gr * y[j + h] + gi * y[j];
            gb[j] += gr * x[j] + gi * x[j + h];
            gb[j + h] += -gr * x[j + h] + gi * x[j];
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::complex_conj(Var a) {
    const Tensor& x = val(a.idx);
    if (x.rows() != 1 && x.cols() != 1) {
        throw ContractError("complex_conj: expects a vector, got " + x.shape_str());
    }
    if (x.size() % 2 != 0) {
        throw ContractError("complex_conj: complex layout needs even length");
    }
    const size_t h = x.size() / 2;
    Node n;
    n.owned = Tensor(x.rows(), x.cols());
    for (size_t j = 0; j < h; ++j) {
        n.owned[j] = x[j];
        n.owned[j + h] = -x[j + h];
    }
    n.back = [ai = a.idx, h](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].adjoint;
        Tensor& ga = t.adj(ai);
        for (size_t j = 0; j < h; ++j) {
            ga[j] += g[j];
            ga[j + h] -= g[j + h];
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::complex_abs3_sum(Var a) {
    const Tensor& x = val(a.idx);
    if (x.rows() != 1 && x.cols() != 1) {
        throw ContractError("complex_abs3_sum: expects a vector, got " + x.shape_str());
    }
    if (x.size() % 2 != 0) {
        throw ContractError("complex_abs3_sum: complex layout needs even length");
    }
    const size_t h = x.size() / 2;
    double s = 0.0;
    for (size_t j = 0; j < h; ++j) {
        const double m = std::sqrt(x[j] * x[j] + x[j + h] * x[j + h]);
        s += m * m * m;
    }
    Node n;
    n.owned = Tensor::scalar(s);
    n.back = [ai = a.idx, h](Tape& t, int self) {
        const double g = t.nodes_[self].adjoint[0];
        const Tensor& x = t.val(ai);
        Tensor& ga = t.adj(ai);
        for (size_t j = 0; j < h; ++j) {
            const double m = std::sqrt(x[j] * x[j] + x[j + h] * x[j + h]);
            ga[j] += g * 3.0 * m * x[j];
            ga[j + h] += g * 3.0 * m * x[j + h];
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::bce_with_logits(Var scores, Tensor labels) {
    const Tensor& x = val(scores.idx);
    check_same_shape("bce_with_logits", x, labels);
    double positives = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) positives += labels[i];
    if (positives < 1.0) {
        throw DataError("bce_with_logits: no positive label in target vector");
    }
    double loss = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        // max(x,0) - x*y + log1p(exp(-|x|))
        loss += std::max(x[i], 0.0) - x[i] * labels[i] + std::log1p(std::exp(-std::abs(x[i])));
    }
    Node n;
    n.owned = Tensor::scalar(loss);
    n.back = [si = scores.idx, labels](Tape& t, int self) {
        const double g = t.nodes_[self].adjoint[0];
        const Tensor& x = t.val(si);
        Tensor& gs = t.adj(si);
        for (size_t i = 0; i < x.size(); ++i) {
            gs[i] += g * (stable_sigmoid(x[i]) - labels[i]);
        }
    };
    return Var{push(std::move(n))};
}

Var Tape::ce_with_logits(Var scores, int target_index) {
    const Tensor& x = val(scores.idx);
    if (x.rows() != 1 && x.cols() != 1) {
        throw ContractError("ce_with_logits: expects a vector, got " + x.shape_str());
    }
    if (target_index < 0 || static_cast<size_t>(target_index) >= x.size()) {
        throw LookupError("ce_with_logits: target " + std::to_string(target_index) +
                          " out of range");
    }
    double mx = x[0];
    for (size_t i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
    double z = 0.0;
    for (size_t i = 0; i < x.size(); ++i) z += std::exp(x[i] - mx);
    const double loss = std::log(z) + mx - x[static_cast<size_t>(target_index)];
    Node n;
    n.owned = Tensor::scalar(loss);
    n.back = [si = scores.idx, target_index, mx, z](Tape& t, int self) {
        const double g = t.nodes_[self].adjoint[0];
        const Tensor& x = t.val(si);
        Tensor& gs = t.adj(si);
        const double inv_z = 1.0 / z;
        for (size_t i = 0; i < x.size(); ++i) {
            double p = std::exp(x[i] - mx) * inv_z;
            if (i == static_cast<size_t>(target_index)) p -= 1.0;
            gs[i] += g * p;
        }
    };
    return Var{push(std::move(n))};
}

void Tape::backward(Var loss) {
    const Tensor& lv = val(loss.idx);
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractError("backward: loss must be scalar, got " + lv.shape_str());
    }
    adj(loss.idx)[0] = 1.0;
    for (int i = loss.idx; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.adjoint_ready && n.back) n.back(*this, i);
    }
    for (const auto& [p, idx] : param_nodes_) {
        Node& n = nodes_[idx];
        if (n.adjoint_ready) {
            n.bound->grad.add_in_place(n.adjoint);
        }
        // Parameters never touched by the loss keep their zero gradient.
    }
}

}  // namespace chronoqa
