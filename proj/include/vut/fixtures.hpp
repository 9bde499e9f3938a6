#pragma once

#include <string>
#include <vector>

namespace vut {

struct FixtureCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Replays the frozen pipeline — regenerate the golden corpus, rerun the short
// training schedule, re-evaluate the final checkpoint, recompute the text
// metrics — and compares against the committed artifacts. Corpus files must
// match byte for byte; logged losses and report numbers may drift by 1e-6.
// `work_dir` receives the regenerated copies.
std::vector<FixtureCheck> verify_fixtures(const std::string& fixtures_dir,
                                          const std::string& work_dir);

// Overwrites the committed corpus / loss-log / report fixtures with freshly
// generated ones. The text-metrics expectations are not touched: those come
// from the independent reference script (see tests/oracles/).
void bless_fixtures(const std::string& fixtures_dir, const std::string& work_dir);

bool all_ok(const std::vector<FixtureCheck>& checks);

}  // namespace vut
