#include "supercent/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "supercent/errors.hpp"

namespace supercent {

BacktestResult long_short_returns(const std::vector<BacktestRecord>& records, int k) {
  if (k < 1) throw InputError("backtest: k must be >= 1");
  if (records.empty()) throw InputError("backtest: no records");

  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, const BacktestRecord*>> by_period;
  for (const auto& r : records) {
    if (!std::isfinite(r.score) || !std::isfinite(r.next_return))
      throw InputError("backtest: non-finite value for asset " + r.asset + " in period " +
                       r.period);
    auto [it, fresh] = by_period.try_emplace(r.period);
    if (fresh) order.push_back(r.period);
    if (!it->second.emplace(r.asset, &r).second)
      throw InputError("backtest: duplicate asset " + r.asset + " in period " + r.period);
  }

  std::set<std::string> universe;
  for (const auto& [asset, rec] : by_period.at(order.front())) universe.insert(asset);
  if (2 * static_cast<std::size_t>(k) > universe.size())
    throw InputError("backtest: 2k = " + std::to_string(2 * k) + " exceeds the " +
                     std::to_string(universe.size()) + " assets");

  BacktestResult out;
  out.k = k;
  double total = 0.0;
  for (const auto& period : order) {
    const auto& rows = by_period.at(period);
    std::set<std::string> assets;
    for (const auto& [asset, rec] : rows) assets.insert(asset);
    if (assets != universe)
      throw InputError("backtest: period " + period + " does not cover the same assets as " +
                       order.front());

    std::vector<const BacktestRecord*> ranked;
    for (const auto& [asset, rec] : rows) ranked.push_back(rec);
    auto lows = ranked;
    std::stable_sort(lows.begin(), lows.end(), [](auto* a, auto* b) {
      return a->score != b->score ? a->score < b->score : a->asset < b->asset;
    });
    auto highs = ranked;
    std::stable_sort(highs.begin(), highs.end(), [](auto* a, auto* b) {
      return a->score != b->score ? a->score > b->score : a->asset < b->asset;
    });

    PeriodReturn pr;
    pr.period = period;
    double long_sum = 0.0;
    double short_sum = 0.0;
    for (int i = 0; i < k; ++i) {
      pr.long_assets.push_back(lows[i]->asset);
      long_sum += lows[i]->next_return;
      pr.short_assets.push_back(highs[i]->asset);
      short_sum += highs[i]->next_return;
    }
    pr.ret = (long_sum - short_sum) / k;
    total += pr.ret;
    out.periods.push_back(std::move(pr));
  }
  out.mean_return = total / static_cast<double>(out.periods.size());
  return out;
}

}  // namespace supercent
