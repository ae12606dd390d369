#include "aslfit/stats.hpp"

#include "aslfit/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace asl {

namespace {
constexpr int kLabelPathology = 3;
}

double quantile(std::vector<double> &values, double q)
{
    if (values.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - w) + values[hi] * w;
}

Volume relative_difference(const Volume &est, const Volume &ref)
{
    require_same_grid(est.grid, ref.grid, "relative_difference");
    Volume out(est.grid);
    for (std::size_t v = 0; v < out.size(); ++v)
        out[v] = ref[v] != 0.0 ? (est[v] - ref[v]) / ref[v]
                               : std::numeric_limits<double>::quiet_NaN();
    return out;
}

namespace {

Volume window_mask(const Volume &ref, double lo, double hi, const Volume &labels)
{
    Volume m(ref.grid);
    const bool have_labels = labels.grid == ref.grid;
    for (std::size_t v = 0; v < m.size(); ++v) {
        const bool in_window = ref[v] >= lo && ref[v] <= hi;
        const bool is_path = have_labels && labels[v] == kLabelPathology;
        m[v] = (in_window && !is_path) ? 1.0 : 0.0;
    }
    return m;
}

} // namespace

Volume gm_mask(const Volume &ref_cbf_ext, const Volume &labels)
{
    return window_mask(ref_cbf_ext, 55.0, 65.0, labels);
}

Volume wm_mask(const Volume &ref_cbf_ext, const Volume &labels)
{
    return window_mask(ref_cbf_ext, 15.0, 30.0, labels);
}

Volume pathology_mask(const Volume &labels)
{
    Volume m(labels.grid);
    for (std::size_t v = 0; v < m.size(); ++v)
        m[v] = labels[v] == kLabelPathology ? 1.0 : 0.0;
    return m;
}

RegionStat region_stat(const Volume &est, const Volume &ref, const Volume &mask,
                       const std::string &region, const std::string &metric)
{
    require_same_grid(est.grid, ref.grid, "region_stat");
    require_same_grid(est.grid, mask.grid, "region_stat");
    RegionStat rs;
    rs.region = region;
    rs.metric = metric;
    std::vector<double> vals, rel;
    for (std::size_t v = 0; v < est.size(); ++v) {
        if (mask[v] == 0.0)
            continue;
        vals.push_back(est[v]);
        if (ref[v] != 0.0)
            rel.push_back((est[v] - ref[v]) / ref[v] * 100.0);
    }
    rs.n = static_cast<long>(vals.size());
    if (!vals.empty()) {
        std::vector<double> tmp = vals;
        rs.median = quantile(tmp, 0.5);
        tmp = vals;
        rs.q25 = quantile(tmp, 0.25);
        tmp = vals;
        rs.q75 = quantile(tmp, 0.75);
        rs.iqr = rs.q75 - rs.q25;
    }
    if (!rel.empty())
        rs.rel_bias_pct = quantile(rel, 0.5);
    return rs;
}

void stack_median_iqr(const std::vector<const Volume *> &vols, Volume &median_out, Volume &iqr_out)
{
    if (vols.size() < 2)
        throw std::invalid_argument("stack_median_iqr: need at least 2 volumes");
    const Grid g = vols.front()->grid;
    for (const Volume *v : vols)
        require_same_grid(v->grid, g, "stack_median_iqr");
    median_out = Volume(g);
    iqr_out = Volume(g);
    std::vector<double> s(vols.size());
    for (std::size_t vx = 0; vx < g.nvox(); ++vx) {
        for (std::size_t r = 0; r < vols.size(); ++r)
            s[r] = (*vols[r])[vx];
        std::vector<double> tmp = s;
        median_out[vx] = quantile(tmp, 0.5);
        tmp = s;
        const double q25 = quantile(tmp, 0.25);
        tmp = s;
        const double q75 = quantile(tmp, 0.75);
        iqr_out[vx] = q75 - q25;
    }
}

double relative_iqr_pct(const Volume &iqr, const Volume &ref, const Volume &mask)
{
    require_same_grid(iqr.grid, ref.grid, "relative_iqr_pct");
    std::vector<double> rel;
    for (std::size_t v = 0; v < iqr.size(); ++v)
        if (mask[v] != 0.0 && ref[v] != 0.0)
            rel.push_back(iqr[v] / ref[v] * 100.0);
    return quantile(rel, 0.5);
}

std::string StatsReport::to_json() const
{
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const RegionStat &r : rows)
        j["rows"].push_back({{"region", r.region},
                             {"metric", r.metric},
                             {"n", r.n},
                             {"median", r.median},
                             {"q25", r.q25},
                             {"q75", r.q75},
                             {"iqr", r.iqr},
                             {"rel_bias_pct", r.rel_bias_pct}});
    return j.dump(2);
}

StatsReport StatsReport::from_json(const std::string &text)
{
    StatsReport rep;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        for (const auto &e : j.at("rows")) {
            RegionStat r;
            r.region = e.at("region").get<std::string>();
            r.metric = e.at("metric").get<std::string>();
            r.n = e.at("n").get<long>();
            r.median = e.at("median").get<double>();
            r.q25 = e.at("q25").get<double>();
            r.q75 = e.at("q75").get<double>();
            r.iqr = e.at("iqr").get<double>();
            r.rel_bias_pct = e.at("rel_bias_pct").get<double>();
            rep.rows.push_back(r);
        }
    } catch (const nlohmann::json::exception &e) {
        throw IoError(std::string("bad stats report JSON: ") + e.what());
    }
    return rep;
}

namespace {
std::string fmt_double(double x)
{
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}
} // namespace

std::string StatsReport::to_csv() const
{
    std::ostringstream os;
    os << "region,metric,n,median,q25,q75,iqr,rel_bias_pct\n";
    for (const RegionStat &r : rows)
        os << r.region << ',' << r.metric << ',' << r.n << ',' << fmt_double(r.median) << ','
           << fmt_double(r.q25) << ',' << fmt_double(r.q75) << ',' << fmt_double(r.iqr) << ','
           << fmt_double(r.rel_bias_pct) << '\n';
    return os.str();
}

StatsReport StatsReport::from_csv(const std::string &text)
{
    StatsReport rep;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "region,metric,n,median,q25,q75,iqr,rel_bias_pct")
        throw IoError("bad stats CSV header");
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        RegionStat r;
        std::string field;
        auto next = [&]() {
            if (!std::getline(ls, field, ','))
                throw IoError("bad stats CSV row: " + line);
            return field;
        };
        r.region = next();
        r.metric = next();
        r.n = std::stol(next());
        r.median = std::stod(next());
        r.q25 = std::stod(next());
        r.q75 = std::stod(next());
        r.iqr = std::stod(next());
        r.rel_bias_pct = std::stod(next());
        rep.rows.push_back(r);
    }
    return rep;
}

} // namespace asl
