#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "kel/acceptance.hpp"

// Runs the listed criteria (all when none are given); exit status 0 iff every one passes.
int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty()) {
    for (int i = 1; i <= kel::kCriterionCount; ++i) ids.push_back(i);
  }
  int failed = 0;
  for (int id : ids) {
    if (id < 1 || id > kel::kCriterionCount) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }
    const kel::CriterionResult r = kel::run_criterion(id, {});
    std::cout << kel::format_result_line(r) << std::endl;
    failed += r.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
