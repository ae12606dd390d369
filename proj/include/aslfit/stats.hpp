// stats.hpp — region statistics, relative-difference maps and the
// median/IQR aggregation used by the pseudo-replica analysis.
#pragma once

#include "aslfit/volume.hpp"

#include <string>
#include <vector>

namespace asl {

struct RegionStat {
    std::string region; // GM / WM / pathology
    std::string metric; // cbf / att
    long n = 0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double iqr = 0.0;
    double rel_bias_pct = 0.0; // median voxel-wise (est-ref)/ref * 100
};

struct StatsReport {
    std::vector<RegionStat> rows;

    std::string to_json() const;
    std::string to_csv() const;
    static StatsReport from_json(const std::string &text);
    static StatsReport from_csv(const std::string &text);
};

// Linear-interpolation quantile (q in [0,1]); sorts its argument.
double quantile(std::vector<double> &values, double q);

// (est - ref)/ref where ref != 0, NaN sentinel elsewhere.
Volume relative_difference(const Volume &est, const Volume &ref);

// Paper's evaluation windows on the reference CBF map (external units):
// WM: [15, 30] ml/100g/min, GM: [55, 65]. Voxels of the pathology label are
// excluded so regions stay disjoint. labels may be empty.
Volume gm_mask(const Volume &ref_cbf_ext, const Volume &labels);
Volume wm_mask(const Volume &ref_cbf_ext, const Volume &labels);
Volume pathology_mask(const Volume &labels);

// One region row; media/IQR of est inside the mask, bias vs ref.
RegionStat region_stat(const Volume &est, const Volume &ref, const Volume &mask,
                       const std::string &region, const std::string &metric);

// Voxel-wise median and IQR across realizations.
void stack_median_iqr(const std::vector<const Volume *> &vols, Volume &median_out, Volume &iqr_out);

// Median over mask voxels of IQR/reference * 100.
double relative_iqr_pct(const Volume &iqr, const Volume &ref, const Volume &mask);

} // namespace asl
