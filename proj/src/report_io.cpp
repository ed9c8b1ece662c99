#include "quantclaw/report_io.hpp"

#include "quantclaw/errors.hpp"
#include "quantclaw/profiles.hpp"

namespace quantclaw::profile {

using nlohmann::json;

namespace {

json point_json(const DegradationPoint& p) {
    return {{"model_id", p.model_id}, {"n_params_b", p.n_params_b}, {"delta", p.delta}};
}

DegradationPoint point_from_json(const json& j) {
    return DegradationPoint{j.value("model_id", std::string()), j.at("n_params_b").get<double>(),
                            j.at("delta").get<double>()};
}

template <typename F>
auto wrap(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, where + ": " + e.what());
    }
}

}  // namespace

std::vector<DegradationPoint> points_from_json(const json& j) {
    return wrap("points", [&] {
        std::vector<DegradationPoint> out;
        const auto& arr = j.at("points");
        if (!arr.is_array()) throw Error(ErrorKind::Validation, "points: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            auto p = point_from_json(arr[i]);
            if (!(p.n_params_b > 0.0)) {
                throw Error(ErrorKind::Validation, "points[" + std::to_string(i) + "].n_params_b: must be positive");
            }
            out.push_back(std::move(p));
        }
        return out;
    });
}

std::vector<DegradationPoint> load_points(const std::filesystem::path& path) {
    return points_from_json(read_json_file(path));
}

json to_json(std::span<const DegradationPoint> points) {
    json arr = json::array();
    for (const auto& p : points) arr.push_back(point_json(p));
    return {{"points", arr}};
}

json to_json(const ScalingFit& fit) {
    json excluded = json::array();
    for (const auto& p : fit.excluded) excluded.push_back(point_json(p));
    return {{"a", fit.a},
            {"b", fit.b},
            {"r_squared", fit.r_squared},
            {"points_used", fit.points_used},
            {"excluded", excluded}};
}

ScalingFit scaling_fit_from_json(const json& j) {
    return wrap("fit", [&] {
        ScalingFit fit;
        fit.a = j.at("a").get<double>();
        fit.b = j.at("b").get<double>();
        fit.r_squared = j.at("r_squared").get<double>();
        fit.points_used = j.at("points_used").get<std::size_t>();
        for (const auto& p : j.at("excluded")) fit.excluded.push_back(point_from_json(p));
        return fit;
    });
}

std::vector<ThroughputRow> throughput_from_json(const json& j) {
    return wrap("rows", [&] {
        std::vector<ThroughputRow> out;
        for (const auto& r : j.at("rows")) {
            out.push_back(ThroughputRow{r.at("input_len").get<double>(), r.at("output_len").get<double>(),
                                        r.at("high_tps").get<double>(), r.at("low_tps").get<double>()});
        }
        return out;
    });
}

std::vector<ThroughputRow> load_throughput(const std::filesystem::path& path) {
    return throughput_from_json(read_json_file(path));
}

}  // namespace quantclaw::profile
