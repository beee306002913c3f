#pragma once

#include <string>
#include <vector>

namespace supercent {

// One row of the backtest input: an asset's centrality score in a period and
// its return over the following period.
struct BacktestRecord {
  std::string period;
  std::string asset;
  double score = 0.0;
  double next_return = 0.0;
};

struct PeriodReturn {
  std::string period;
  std::vector<std::string> long_assets;
  std::vector<std::string> short_assets;
  double ret = 0.0;
};

struct BacktestResult {
  std::vector<PeriodReturn> periods;
  double mean_return = 0.0;
  int k = 0;
};

/// Each period, equal-weight long the k lowest-score assets and short the k
/// highest; the period return is mean(long) − mean(short). Ties in score go to
/// the smaller asset identifier on both legs. Periods keep their order of first
/// appearance; every period must cover the same asset set with no duplicates.
BacktestResult long_short_returns(const std::vector<BacktestRecord>& records, int k = 3);

}  // namespace supercent
