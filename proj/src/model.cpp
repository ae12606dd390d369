#include "aslfit/model.hpp"

#include "aslfit/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace asl {

namespace {

void require_finite(double x, const char *name)
{
    if (!std::isfinite(x))
        throw std::invalid_argument(std::string("non-finite ") + name);
}

} // namespace

void Protocol::validate() const
{
    if (t.empty() || tau.size() != t.size())
        throw std::invalid_argument("protocol: t and tau must be non-empty and equally long");
    for (std::size_t n = 0; n < t.size(); ++n) {
        require_finite(t[n], "t");
        require_finite(tau[n], "tau");
        if (t[n] <= 0.0 || tau[n] <= 0.0)
            throw std::invalid_argument("protocol: t and tau must be positive");
        if (t[n] < tau[n])
            throw std::invalid_argument("protocol: t must be >= tau (PLD >= 0)");
    }
    require_finite(alpha, "alpha");
    require_finite(lambda, "lambda");
    require_finite(t1, "t1");
    require_finite(t1b, "t1b");
    if (alpha <= 0.0 || alpha > 1.0)
        throw std::invalid_argument("protocol: alpha must be in (0,1]");
    if (lambda <= 0.0 || t1 <= 0.0 || t1b <= 0.0)
        throw std::invalid_argument("protocol: lambda, t1, t1b must be positive");
    if (!m0.grid.valid() || m0.size() != m0.grid.nvox())
        throw std::invalid_argument("protocol: invalid m0 volume");
    for (double v : m0.data)
        if (!(v >= 0.0))
            throw std::invalid_argument("protocol: m0 must be finite and >= 0");
}

double t1_app(double f, double t1, double lambda)
{
    require_finite(f, "f");
    require_finite(t1, "t1");
    require_finite(lambda, "lambda");
    if (t1 <= 0.0 || lambda <= 0.0 || f < 0.0)
        throw std::invalid_argument("t1_app: requires t1 > 0, lambda > 0, f >= 0");
    return 1.0 / (1.0 / t1 + f / lambda);
}

double pcasl_signal(double f, double att, double t, double tau, double alpha, double lambda,
                    double t1, double t1b, double m0)
{
    if (t < att)
        return 0.0;
    const double t1a = 1.0 / (1.0 / t1 + f / lambda);
    const double m0a = alpha * m0 / lambda;
    const double lead = 2.0 * m0a * f * t1a * std::exp(-att / t1b);
    if (t < att + tau)
        return lead * (1.0 - std::exp((att - t) / t1a));
    return lead * std::exp(-(t - tau - att) / t1a) * (1.0 - std::exp(-tau / t1a));
}

SignalDeriv pcasl_signal_deriv(double f, double att, double t, double tau, double alpha,
                               double lambda, double t1, double t1b, double m0)
{
    SignalDeriv d;
    if (t < att)
        return d;
    const double t1a = 1.0 / (1.0 / t1 + f / lambda);
    const double c = 2.0 * alpha * m0 / lambda;
    const double eb = std::exp(-att / t1b);
    // d(T1app)/df = -T1app^2/lambda; d(1/T1app)/df = 1/lambda
    if (t < att + tau) {
        const double e = std::exp((att - t) / t1a);
        d.d_f = c * eb * ((t1a - f * t1a * t1a / lambda) * (1.0 - e) - f * t1a * e * (att - t) / lambda);
        d.d_att = c * f * t1a * eb * (-(1.0 - e) / t1b - e / t1a);
    } else {
        const double w = t - tau - att;
        const double p = std::exp(-att / t1b - w / t1a);
        const double eq = std::exp(-tau / t1a);
        const double q = 1.0 - eq;
        d.d_f = c * p * ((t1a - f * t1a * t1a / lambda) * q - f * t1a * w * q / lambda + f * t1a * tau * eq / lambda);
        d.d_att = c * f * t1a * p * q * (1.0 / t1a - 1.0 / t1b);
    }
    return d;
}

Series signal_series(const ParameterMaps &u, const Protocol &proto)
{
    proto.validate();
    require_same_grid(u.cbf.grid, proto.grid(), "signal_series");
    require_same_grid(u.att.grid, proto.grid(), "signal_series");
    const int nd = proto.n_frames();
    Series out(proto.grid(), nd);
    parallel_for(out.nvox(), [&](std::size_t v) {
        const double f = u.cbf[v];
        const double att = u.att[v];
        const double m0 = proto.m0[v];
        double *row = out.data.data() + v * nd;
        for (int n = 0; n < nd; ++n)
            row[n] = pcasl_signal(f, att, proto.t[n], proto.tau[n], proto.alpha, proto.lambda,
                                  proto.t1, proto.t1b, m0);
    });
    return out;
}

JacobianField signal_jacobian(const ParameterMaps &u, const Protocol &proto)
{
    proto.validate();
    require_same_grid(u.cbf.grid, proto.grid(), "signal_jacobian");
    require_same_grid(u.att.grid, proto.grid(), "signal_jacobian");
    const int nd = proto.n_frames();
    JacobianField jf{Series(proto.grid(), nd), Series(proto.grid(), nd)};
    parallel_for(jf.d_f.nvox(), [&](std::size_t v) {
        const double f = u.cbf[v];
        const double att = u.att[v];
        const double m0 = proto.m0[v];
        double *rf = jf.d_f.data.data() + v * nd;
        double *ra = jf.d_att.data.data() + v * nd;
        for (int n = 0; n < nd; ++n) {
            const SignalDeriv d = pcasl_signal_deriv(f, att, proto.t[n], proto.tau[n], proto.alpha,
                                                     proto.lambda, proto.t1, proto.t1b, m0);
            rf[n] = d.d_f;
            ra[n] = d.d_att;
        }
    });
    return jf;
}

} // namespace asl
