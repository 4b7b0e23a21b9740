#include <fstream>
#include <sstream>

#include "acqsim/errors.hpp"
#include "acqsim/scenarios.hpp"

namespace acqsim {

std::string metrics_csv(const ScenarioOutput& out) {
  std::ostringstream s;
  write_metric_rows(s, out.rows);
  return s.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("WriteFailed", path.string());
  f << contents;
  if (!f) throw data_error("WriteFailed", path.string());
}

}  // namespace

void write_scenario_output(const std::filesystem::path& dir, const ScenarioOutput& out) {
  std::filesystem::create_directories(dir / "plotdata");
  write_file(dir / "report.json", out.report.dump(2) + "\n");
  write_file(dir / "metrics.csv", metrics_csv(out));
  for (const auto& [name, contents] : out.files) write_file(dir / name, contents);
}

}  // namespace acqsim
