#include "orchestra/forecast.hpp"

#include <stdexcept>

namespace orchestra {

std::string_view to_string(ForecastKind k) noexcept {
    switch (k) {
        case ForecastKind::LastValue: return "last_value";
        case ForecastKind::Ewma: return "ewma";
        case ForecastKind::LinearTrend: return "linear_trend";
    }
    return "?";
}

ForecastKind forecast_kind_from_string(std::string_view name) {
    if (name == "last_value") return ForecastKind::LastValue;
    if (name == "ewma") return ForecastKind::Ewma;
    if (name == "linear_trend") return ForecastKind::LinearTrend;
    throw ConfigError("unknown forecast kind '" + std::string(name) + "'");
}

ForecastModel fit_forecast(std::span<const double> history, ForecastKind kind, int window, double alpha) {
    if (window < 1) throw ConfigError("forecast window must be >= 1");
    if (kind == ForecastKind::Ewma && !(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("EWMA alpha must be in (0, 1]");
    }
    if (history.size() < static_cast<std::size_t>(window)) {
        throw InsufficientHistory("need " + std::to_string(window) + " samples, have " +
                                  std::to_string(history.size()));
    }
    const auto recent = history.last(static_cast<std::size_t>(window));

    ForecastModel m;
    m.kind = kind;
    m.window = window;
    m.alpha = alpha;
    switch (kind) {
        case ForecastKind::LastValue:
            m.level = recent.back();
            break;
        case ForecastKind::Ewma: {
            double level = recent.front();
            for (std::size_t i = 1; i < recent.size(); ++i) level = alpha * recent[i] + (1.0 - alpha) * level;
            m.level = level;
            break;
        }
        case ForecastKind::LinearTrend: {
            // Least squares over x = 0..n-1, reported relative to the newest sample.
            const double n = static_cast<double>(recent.size());
            if (recent.size() == 1) {
                m.intercept = recent.front();
                m.level = m.intercept;
                break;
            }
            const double x_mean = (n - 1.0) / 2.0;
            double y_mean = 0.0;
            for (double y : recent) y_mean += y;
            y_mean /= n;
            double sxy = 0.0;
            double sxx = 0.0;
            for (std::size_t i = 0; i < recent.size(); ++i) {
                const double dx = static_cast<double>(i) - x_mean;
                sxy += dx * (recent[i] - y_mean);
                sxx += dx * dx;
            }
            m.slope = sxy / sxx;
            m.intercept = y_mean + m.slope * (n - 1.0 - x_mean);
            m.level = m.intercept;
            break;
        }
    }
    return m;
}

double predict_load(const ForecastModel& model, int horizon) {
    if (horizon < 1) throw std::invalid_argument("forecast horizon must be >= 1");
    if (model.kind == ForecastKind::LinearTrend) {
        return model.intercept + model.slope * static_cast<double>(horizon);
    }
    return model.level;
}

}  // namespace orchestra
