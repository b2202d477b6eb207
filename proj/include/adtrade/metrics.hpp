#pragma once

namespace adtrade {

// Per-auction quantities (or their expectations).
struct MetricsRecord {
  double revenue = 0.0;
  double welfare = 0.0;
  double clicks = 0.0;
  double impressions = 0.0;

  MetricsRecord& operator+=(const MetricsRecord& o) {
    revenue += o.revenue;
    welfare += o.welfare;
    clicks += o.clicks;
    impressions += o.impressions;
    return *this;
  }
};

}  // namespace adtrade
