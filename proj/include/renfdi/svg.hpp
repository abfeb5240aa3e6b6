#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "renfdi/dataset.hpp"

namespace renfdi::svg {

struct Series {
  std::string name;
  std::string color;
  Eigen::VectorXd values;
};

/// Line chart of several series against a common time axis.
std::string line_chart(const std::string& title, const Eigen::VectorXd& t,
                       const std::vector<Series>& series, int width = 640, int height = 320);

/// Residual of each filter against the injected fault on its sensor, one file
/// per filter: `<scenario id>_filter_<i>.svg`. Returns the written paths.
std::vector<std::filesystem::path> write_residual_plots(const std::filesystem::path& dir,
                                                        const dataset::Scenario& scenario,
                                                        const Eigen::MatrixXd& residuals,
                                                        double filter_rate);

}  // namespace renfdi::svg
