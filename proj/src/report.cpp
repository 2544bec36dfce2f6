#include "daa/report.hpp"

#include <charconv>
#include <fstream>

#include "daa/errors.hpp"

namespace daa {

namespace {

std::string num(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string row(std::initializer_list<std::string> cells) {
    std::string out;
    for (const auto& c : cells) {
        if (!out.empty()) out += '\t';
        out += c;
    }
    return out + '\n';
}

constexpr const char* kDegenerate = "degenerate-input";

}  // namespace

RunReport build_report(const std::vector<MetricRecord>& records) {
    if (records.empty()) throw DegenerateInputError("metric log has no records");
    RunReport rep;
    rep.records = records;
    std::vector<double> llh, win, len;
    for (const auto& r : records) {
        llh.push_back(r.better_mean_llh);
        win.push_back(r.win_prob);
        len.push_back(r.mean_output_tokens);
    }
    try {
        rep.likelihood_win = fit_scaling(llh, win);
    } catch (const DegenerateInputError&) {
    }
    try {
        rep.likelihood_length = pearson_r(llh, len);
    } catch (const DegenerateInputError&) {
    }
    return rep;
}

std::vector<std::pair<std::string, std::string>> render_report(const RunReport& rep) {
    std::string curves = row({"step", "better_mean_llh", "worse_mean_llh", "margin", "topk_entropy", "topk_mass",
                              "ead", "win_prob", "train_loss", "mean_output_tokens"});
    std::string lw = row({"step", "better_mean_llh", "win_prob"});
    std::string ll = row({"step", "better_mean_llh", "mean_output_tokens"});
    std::string heat = row({"step", "better_mean_llh", "worse_mean_llh", "win_prob"});
    for (const auto& r : rep.records) {
        const auto step = std::to_string(r.step);
        curves += row({step, num(r.better_mean_llh), num(r.worse_mean_llh), num(r.margin), num(r.topk_entropy),
                       num(r.topk_mass), num(r.ead), num(r.win_prob), num(r.train_loss),
                       num(r.mean_output_tokens)});
        lw += row({step, num(r.better_mean_llh), num(r.win_prob)});
        ll += row({step, num(r.better_mean_llh), num(r.mean_output_tokens)});
        heat += row({step, num(r.better_mean_llh), num(r.worse_mean_llh), num(r.win_prob)});
    }

    std::string summary = row({"quantity", "value"});
    summary += row({"records", std::to_string(rep.records.size())});
    if (const auto& f = rep.likelihood_win) {
        summary += row({"likelihood_win.linear_rmse", num(f->linear_rmse)});
        summary += row({"likelihood_win.quadratic_rmse", num(f->quadratic_rmse)});
        summary += row({"likelihood_win.relative_improvement", num(f->relative_improvement())});
    } else {
        summary += row({"likelihood_win.linear_rmse", kDegenerate});
        summary += row({"likelihood_win.quadratic_rmse", kDegenerate});
        summary += row({"likelihood_win.relative_improvement", kDegenerate});
    }
    if (const auto& c = rep.likelihood_length) {
        summary += row({"likelihood_length.pearson_r", num(c->r)});
        summary += row({"likelihood_length.p_value", num(c->p_value)});
    } else {
        summary += row({"likelihood_length.pearson_r", kDegenerate});
        summary += row({"likelihood_length.p_value", kDegenerate});
    }

    return {{"curves.tsv", curves},
            {"likelihood_win.tsv", lw},
            {"likelihood_length.tsv", ll},
            {"heatmap.tsv", heat},
            {"summary.tsv", summary}};
}

void write_report(const RunReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : render_report(report)) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + (dir / name).string());
        out << text;
    }
}

}  // namespace daa
