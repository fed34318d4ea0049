#pragma once

#include <span>
#include <string>
#include <string_view>

#include "orchestra/resources.hpp"

namespace orchestra {

enum class ForecastKind { LastValue, Ewma, LinearTrend };

[[nodiscard]] std::string_view to_string(ForecastKind k) noexcept;
/// "last_value", "ewma" or "linear_trend". Throws ConfigError.
[[nodiscard]] ForecastKind forecast_kind_from_string(std::string_view name);

class InsufficientHistory : public Error {
public:
    using Error::Error;
};

/// A fitted one-dimensional load forecaster.
struct ForecastModel {
    ForecastKind kind = ForecastKind::LastValue;
    int window = 1;
    double alpha = 1.0;      // EWMA smoothing
    double level = 0.0;      // LastValue / EWMA level
    double slope = 0.0;      // LinearTrend, per step
    double intercept = 0.0;  // LinearTrend value at the newest sample
};

/// Fits over the newest `window` samples. Throws InsufficientHistory when
/// history is shorter than the window, ConfigError on a bad window or alpha.
[[nodiscard]] ForecastModel fit_forecast(std::span<const double> history, ForecastKind kind, int window,
                                         double alpha = 0.5);

/// Point forecast `horizon` steps past the newest sample. Throws
/// std::invalid_argument for horizon < 1.
[[nodiscard]] double predict_load(const ForecastModel& model, int horizon);

}  // namespace orchestra
