#include "facekey/simcal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <stdexcept>

#include "facekey/kernels.hpp"

namespace facekey::simcal {

using nlohmann::json;

EpisodeScript parse_script(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("script: ") + e.what());
    }
    try {
        EpisodeScript s;
        s.total_frames = doc.at("total_frames").get<std::int64_t>();
        s.fps = doc.value("fps", 30.0);
        s.seed = doc.value("seed", std::uint64_t{0});
        s.confidence = doc.value("confidence", 0.99f);
        if (const auto it = doc.find("noise"); it != doc.end()) {
            s.sigma = it->value("sigma", 0.0f);
            if (const auto per = it->find("per_au"); per != it->end())
                for (const auto& [au, sigma] : per->items()) s.sigma_per_au[std::stoi(au)] = sigma.get<float>();
        }
        for (const auto& jd : doc.value("confidence_dips", json::array()))
            s.confidence_dips.push_back(
                {jd.at("start_frame").get<std::int64_t>(), jd.at("duration_frames").get<std::int64_t>(),
                 jd.at("level").get<float>()});
        for (const auto& je : doc.value("episodes", json::array())) {
            Episode e;
            e.rule_id = je.value("rule", std::string{});
            if (const auto t = je.find("targets"); t != je.end())
                for (const auto& [au, v] : t->items()) e.targets[std::stoi(au)] = v.get<float>();
            e.present = je.value("present", std::vector<int>{});
            e.start_frame = je.at("start_frame").get<std::int64_t>();
            e.duration_frames = je.at("duration_frames").get<std::int64_t>();
            e.intensity_level = je.value("intensity_level", 2.5f);
            s.episodes.push_back(std::move(e));
        }
        return s;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("script: ") + e.what());
    }
}

EpisodeScript load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read script '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_script(ss.str());
}

json script_to_json(const EpisodeScript& s) {
    json episodes = json::array();
    for (const auto& e : s.episodes) {
        json je = {{"start_frame", e.start_frame},
                   {"duration_frames", e.duration_frames},
                   {"intensity_level", e.intensity_level}};
        if (!e.rule_id.empty()) je["rule"] = e.rule_id;
        if (!e.targets.empty()) {
            json t = json::object();
            for (const auto& [au, v] : e.targets) t[std::to_string(au)] = v;
            je["targets"] = t;
        }
        if (!e.present.empty()) je["present"] = e.present;
        episodes.push_back(std::move(je));
    }
    json per = json::object();
    for (const auto& [au, sigma] : s.sigma_per_au) per[std::to_string(au)] = sigma;
    json dips = json::array();
    for (const auto& d : s.confidence_dips)
        dips.push_back({{"start_frame", d.start_frame}, {"duration_frames", d.duration_frames}, {"level", d.level}});
    return {{"total_frames", s.total_frames}, {"fps", s.fps},       {"seed", s.seed},
            {"confidence", s.confidence},     {"noise", {{"sigma", s.sigma}, {"per_au", per}}},
            {"confidence_dips", dips},        {"episodes", episodes}};
}

std::vector<AUFrame> generate_stream(const EpisodeScript& script, std::span<const ExpressionRule> rules) {
    if (script.total_frames < 0) throw std::invalid_argument("total_frames must be >= 0");
    if (!(script.fps > 0)) throw std::invalid_argument("fps must be positive");
    const auto n = static_cast<std::size_t>(script.total_frames);

    std::array<float, kAuCount> sigma{};
    for (std::size_t i = 0; i < kAuCount; ++i) {
        const auto it = script.sigma_per_au.find(kAuNumbers[i]);
        sigma[i] = it != script.sigma_per_au.end() ? it->second : script.sigma;
    }

    // Pre-noise targets.
    std::vector<std::array<float, kAuCount>> level(n, std::array<float, kAuCount>{});
    std::vector<std::uint32_t> presence(n, 0);

    const auto au_or_throw = [](int number) {
        const auto au = AuId::from_number(number);
        if (!au) throw std::invalid_argument("script references untracked AU" + std::to_string(number));
        return *au;
    };

    for (const auto& e : script.episodes) {
        if (e.duration_frames < 1 || e.start_frame < 0 || e.start_frame >= script.total_frames)
            throw std::invalid_argument("episode outside [0, total_frames) or empty");
        std::vector<std::pair<AuId, float>> set_level;
        std::uint32_t set_present = 0;
        if (!e.rule_id.empty()) {
            const auto it = std::find_if(rules.begin(), rules.end(), [&](const auto& r) { return r.rule_id == e.rule_id; });
            if (it == rules.end()) throw std::invalid_argument("script references unknown rule '" + e.rule_id + "'");
            for (const auto& c : it->conditions) {
                set_level.emplace_back(c.au, e.intensity_level);
                if (std::holds_alternative<Presence>(c.mode)) set_present |= std::uint32_t{1} << c.au.index();
            }
        }
        for (const auto& [au, v] : e.targets) set_level.emplace_back(au_or_throw(au), v);
        for (const int au : e.present) set_present |= std::uint32_t{1} << au_or_throw(au).index();

        const auto end = std::min<std::int64_t>(e.start_frame + e.duration_frames, script.total_frames);
        for (auto f = e.start_frame; f < end; ++f) {
            for (const auto& [au, v] : set_level) level[f][au.index()] = v;
            presence[f] |= set_present;
        }
    }

    std::mt19937_64 rng(script.seed);
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::vector<AUFrame> frames(n);
    for (std::size_t f = 0; f < n; ++f) {
        AUFrame& fr = frames[f];
        fr.frame_index = static_cast<std::int64_t>(f);
        fr.timestamp_ms = std::llround(static_cast<double>(f) * 1000.0 / script.fps);
        fr.confidence = script.confidence;
        for (const auto& dip : script.confidence_dips)
            if (static_cast<std::int64_t>(f) >= dip.start_frame &&
                static_cast<std::int64_t>(f) < dip.start_frame + dip.duration_frames)
                fr.confidence = dip.level;
        fr.confidence = std::clamp(fr.confidence, 0.0f, 1.0f);
        fr.presence_bits = presence[f];
        for (std::size_t i = 0; i < kAuCount; ++i) {
            float v = level[f][i];
            if (sigma[i] > 0.0f) v += sigma[i] * gauss(rng);
            fr.set_intensity(AuId::from_index(i), v);
        }
    }
    return frames;
}

std::vector<std::size_t> oracle_fires(std::span<const std::uint8_t> matches, int k, const RearmPolicy& rearm) {
    std::vector<std::size_t> fires;
    const auto n = static_cast<std::ptrdiff_t>(matches.size());
    if (k < 1) k = 1;

    if (std::holds_alternative<ReleaseRequired>(rearm)) {
        std::ptrdiff_t i = 0;
        while (i < n) {
            if (!matches[i]) {
                ++i;
                continue;
            }
            std::ptrdiff_t j = i;
            while (j < n && matches[j]) ++j;
            if (j - i >= k) fires.push_back(static_cast<std::size_t>(i + k - 1));
            i = j;
        }
        return fires;
    }

    const int gap = std::max(std::get<Refractory>(rearm).frames, 0);
    // Candidate i fires iff the matched run since the later of (last miss,
    // last fire) has length >= k and i is at least `gap` after the last fire.
    std::optional<std::ptrdiff_t> last_fire;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (!matches[i]) continue;
        std::ptrdiff_t start = i;
        while (start > 0 && matches[start - 1] && (!last_fire || start - 1 > *last_fire)) --start;
        const bool long_enough = i - start + 1 >= k;
        const bool rested = !last_fire || i - *last_fire >= gap;
        if (long_enough && rested) {
            fires.push_back(static_cast<std::size_t>(i));
            last_fire = i;
        }
    }
    return fires;
}

std::optional<double> RunMetrics::mean_latency() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& l : activation_latency_frames)
        if (l) {
            sum += static_cast<double>(*l);
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

RunMetrics measure(std::span<const TriggerRecord> triggers, const EpisodeScript& script) {
    RunMetrics m;
    m.activation_latency_frames.assign(script.episodes.size(), std::nullopt);
    for (const auto& t : triggers) {
        bool attributed = false;
        for (std::size_t e = 0; e < script.episodes.size(); ++e) {
            const auto& ep = script.episodes[e];
            if (t.frame_index < ep.start_frame || t.frame_index >= ep.start_frame + ep.duration_frames) continue;
            if (!ep.rule_id.empty() && ep.rule_id != t.rule_id) continue;
            attributed = true;
            if (!m.activation_latency_frames[e]) m.activation_latency_frames[e] = t.frame_index - ep.start_frame;
            else ++m.repeat_fire_count;
            break;
        }
        if (!attributed) ++m.false_positive_count;
    }
    for (const auto& l : m.activation_latency_frames)
        if (!l) ++m.miss_count;
    return m;
}

std::vector<TriggerRecord> run_profile(const Profile& profile, std::span<const AUFrame> frames) {
    Session session(profile);
    std::vector<TriggerRecord> out;
    for (const auto& f : frames)
        for (const auto& t : session.step(f).triggers)
            if (t.source == EventSource::Face) out.push_back({t.frame_index, t.rule_id});
    return out;
}

std::vector<SweepRow> sweep(std::span<const AUFrame> frames, const EpisodeScript& labels, const ExpressionRule& rule,
                            std::span<const AuId> au_ids, std::span<const float> thresholds,
                            std::span<const int> frame_thresholds) {
    if (thresholds.empty() || frame_thresholds.empty() || au_ids.empty())
        throw std::invalid_argument("sweep grid is empty");

    EpisodeScript relevant = labels;
    relevant.episodes.clear();
    for (const auto& e : labels.episodes)
        if (e.rule_id.empty() || e.rule_id == rule.rule_id) relevant.episodes.push_back(e);

    const kernels::FrameColumns columns(frames);
    const auto batch = kernels::active_kernels().match_batch;

    const auto evaluate_threshold = [&](float threshold) {
        ExpressionRule r = rule;
        for (auto& c : r.conditions)
            if (std::find(au_ids.begin(), au_ids.end(), c.au) != au_ids.end()) c.mode = IntensityAbove{threshold};
        std::vector<std::uint8_t> matched(frames.size());
        batch(columns, compile_rule(r), matched);

        std::vector<SweepRow> rows;
        for (const int k : frame_thresholds) {
            r.frame_threshold = k;
            DebounceState state;
            std::vector<TriggerRecord> fires;
            for (std::size_t f = 0; f < frames.size(); ++f) {
                const auto step = debounce_step(state, matched[f] != 0, r);
                state = step.state;
                if (step.fire) fires.push_back({frames[f].frame_index, r.rule_id});
            }
            const auto m = measure(fires, relevant);
            rows.push_back({threshold, k, m.false_positive_count, m.miss_count, m.mean_latency()});
        }
        return rows;
    };

    std::vector<std::future<std::vector<SweepRow>>> jobs;
    for (const float t : thresholds) jobs.push_back(std::async(std::launch::async, evaluate_threshold, t));
    std::vector<SweepRow> rows;
    for (auto& j : jobs)
        for (auto& row : j.get()) rows.push_back(row);
    return rows;
}

std::string metrics_csv(const RunMetrics& m, const EpisodeScript& script) {
    std::ostringstream out;
    out << "episode,rule,start_frame,latency_frames,latency_ms\n";
    for (std::size_t e = 0; e < script.episodes.size(); ++e) {
        const auto& ep = script.episodes[e];
        out << e << ',' << ep.rule_id << ',' << ep.start_frame << ',';
        if (const auto& l = m.activation_latency_frames[e])
            out << *l << ',' << std::llround(static_cast<double>(*l) * 1000.0 / script.fps);
        else
            out << "miss,";
        out << '\n';
    }
    out << "# false_positives," << m.false_positive_count << "\n# misses," << m.miss_count << "\n# repeat_fires,"
        << m.repeat_fire_count << '\n';
    return out.str();
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::ostringstream out;
    out << "threshold,frame_threshold,false_positives,misses,mean_latency_frames\n";
    for (const auto& r : rows) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(r.threshold));
        out << buf << ',' << r.frame_threshold << ',' << r.false_positives << ',' << r.misses << ',';
        if (r.mean_latency) {
            std::snprintf(buf, sizeof buf, "%.3f", *r.mean_latency);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace facekey::simcal
