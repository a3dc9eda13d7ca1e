#include "mapnn/stats.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

namespace mapnn::stats {

namespace {

using u128 = unsigned __int128;

void check_score(int v, const char* field) {
    if (v < 1 || v > 4) {
        throw ScoreOutOfRange(std::string(field) + " score " + std::to_string(v) + " outside the 4-point scale 1..4");
    }
}

template <typename T>
T required(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw InvalidArgument(std::string("rating: missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument(std::string("rating: field '") + key + "' has the wrong type");
    }
}

int integer_score(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw InvalidArgument(std::string("rating: missing field '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) throw InvalidArgument(std::string("rating: field '") + key + "' must be a number");
    if (!v.is_number_integer()) {
        const double d = v.get<double>();
        if (d != std::floor(d)) throw ScoreOutOfRange(std::string(key) + " score must be an integer");
        return static_cast<int>(std::clamp(d, -1e6, 1e6));
    }
    return static_cast<int>(std::clamp<std::int64_t>(v.get<std::int64_t>(), -1000000, 1000000));
}

std::string id_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw InvalidArgument(std::string("rating: missing field '") + key + "'");
    const auto& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw InvalidArgument(std::string("rating: field '") + key + "' must be a string");
}

// Row n of Pascal's triangle.
std::vector<u128> binomial_row(int n) {
    std::vector<u128> row(static_cast<std::size_t>(n) + 1, 0);
    row[0] = 1;
    for (int i = 1; i <= n; ++i) {
        for (int k = i; k > 0; --k) row[static_cast<std::size_t>(k)] += row[static_cast<std::size_t>(k) - 1];
    }
    return row;
}

}  // namespace

void RatingRecord::validate() const {
    check_score(noise, "noise");
    check_score(fidelity, "fidelity");
    if (depth && *depth < 1) throw InvalidArgument("rating: depth must be >= 1");
}

RatingRecord rating_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("rating: expected a JSON object");
    RatingRecord r;
    r.case_id = id_field(j, "case_id");
    r.reader_id = id_field(j, "reader_id");
    r.method = required<std::string>(j, "method");
    if (j.contains("depth") && !j.at("depth").is_null()) {
        if (!j.at("depth").is_number_integer()) throw InvalidArgument("rating: field 'depth' must be an integer");
        r.depth = j.at("depth").get<int>();
    }
    r.noise = integer_score(j, "noise");
    r.fidelity = integer_score(j, "fidelity");
    if (j.contains("region")) r.region = required<std::string>(j, "region");
    r.validate();
    return r;
}

nlohmann::json rating_to_json(const RatingRecord& r) {
    nlohmann::json j = {{"case_id", r.case_id}, {"reader_id", r.reader_id}, {"method", r.method},
                        {"noise", r.noise},     {"fidelity", r.fidelity},   {"region", r.region}};
    j["depth"] = r.depth ? nlohmann::json(*r.depth) : nlohmann::json(nullptr);
    return j;
}

std::vector<RatingRecord> read_ratings_jsonl(std::istream& in) {
    std::vector<RatingRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(rating_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("ratings line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ScoreOutOfRange& e) {
            throw ScoreOutOfRange("ratings line " + std::to_string(line_no) + ": " + e.what());
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("ratings line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::string method_family(const std::string& label) {
    auto end = label.size();
    while (end > 0 && (std::isdigit(static_cast<unsigned char>(label[end - 1])) || label[end - 1] == '-' ||
                       label[end - 1] == '_')) {
        --end;
    }
    return end == 0 ? label : label.substr(0, end);
}

std::string outcome_name(Outcome o) {
    switch (o) {
        case Outcome::dl_gt_ir: return "DL_GT_IR";
        case Outcome::equal: return "EQUAL";
        case Outcome::dl_lt_ir: return "DL_LT_IR";
    }
    return "EQUAL";
}

Outcome lexicographic_compare(const RatingRecord& dl, const RatingRecord& ir) {
    if (dl.case_id != ir.case_id || dl.reader_id != ir.reader_id) {
        throw InvalidArgument("lexicographic_compare: records belong to different cases or readers");
    }
    const auto a = std::make_pair(dl.fidelity, dl.noise), b = std::make_pair(ir.fidelity, ir.noise);
    if (a > b) return Outcome::dl_gt_ir;
    if (a < b) return Outcome::dl_lt_ir;
    return Outcome::equal;
}

const RatingRecord& select_best(const std::vector<RatingRecord>& family) {
    if (family.empty()) throw InvalidArgument("select_best: empty family");
    const auto key = [](const RatingRecord& r) {
        // Larger is better: scores up, depth down (missing depth worst), label down.
        return std::make_tuple(r.fidelity, r.noise, r.depth ? -*r.depth : std::numeric_limits<int>::min());
    };
    const RatingRecord* best = &family.front();
    for (const auto& r : family) {
        const auto kr = key(r), kb = key(*best);
        if (kr > kb || (kr == kb && r.method < best->method)) best = &r;
    }
    return *best;
}

double DyadicProbability::value() const {
    return static_cast<double>(std::ldexp(static_cast<long double>(numerator), -log2_denominator));
}

SignTestResult sign_test(std::int64_t n_gt, std::int64_t n_lt) {
    if (n_gt < 0 || n_lt < 0) throw InvalidArgument("sign_test: counts must be nonnegative");
    const std::int64_t n = n_gt + n_lt;
    if (n > kMaxExactSignTestN) {
        throw InvalidArgument("sign_test: n = " + std::to_string(n) + " exceeds the exact-arithmetic limit " +
                              std::to_string(kMaxExactSignTestN));
    }
    SignTestResult r;
    r.n_gt = n_gt;
    r.n_lt = n_lt;
    const auto row = binomial_row(static_cast<int>(n));
    u128 upper = 0, lower = 0;
    for (std::int64_t i = 0; i <= n; ++i) {
        if (i >= n_gt) upper += row[static_cast<std::size_t>(i)];
        if (i <= n_gt) lower += row[static_cast<std::size_t>(i)];
    }
    r.p1 = {upper, static_cast<int>(n)};
    r.p2 = {lower, static_cast<int>(n)};
    r.reject_h1 = r.p1.value() < kSignificanceLevel;
    r.reject_h2 = r.p2.value() < kSignificanceLevel;
    return r;
}

KappaResult cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw InvalidArgument("cohen_kappa: rating lists differ in length");
    if (a.empty()) throw InvalidArgument("cohen_kappa: no ratings");
    std::array<double, 5> ma{}, mb{};
    double agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        check_score(a[i], "kappa");
        check_score(b[i], "kappa");
        ma[static_cast<std::size_t>(a[i])] += 1;
        mb[static_cast<std::size_t>(b[i])] += 1;
        agree += a[i] == b[i];
    }
    const double n = static_cast<double>(a.size());
    KappaResult k;
    k.p_o = agree / n;
    for (std::size_t c = 1; c <= 4; ++c) k.p_e += (ma[c] / n) * (mb[c] / n);
    k.kappa = k.p_e == 1.0 ? 1.0 : (k.p_o - k.p_e) / (1.0 - k.p_e);
    return k;
}

nlohmann::json sign_test_json(const SignTestResult& r) {
    return {{"n_gt", r.n_gt},           {"n_lt", r.n_lt},           {"p1", r.p1.value()},
            {"p2", r.p2.value()},       {"reject_h1", r.reject_h1}, {"reject_h2", r.reject_h2},
            {"alpha", kSignificanceLevel}};
}

nlohmann::json stats_report(const std::vector<RatingRecord>& ratings) {
    // region -> reader -> case -> family -> records
    std::map<std::string, std::map<std::string, std::map<std::string, std::map<std::string, std::vector<RatingRecord>>>>> tree;
    std::map<std::string, std::set<std::string>> families;
    for (const auto& r : ratings) {
        const auto fam = method_family(r.method);
        tree[r.region][r.reader_id][r.case_id][fam].push_back(r);
        families[r.region].insert(fam);
    }

    nlohmann::json comparisons = nlohmann::json::array();
    nlohmann::json kappas = nlohmann::json::array();
    for (const auto& [region, readers] : tree) {
        const std::vector<std::string> fams(families[region].begin(), families[region].end());
        for (std::size_t i = 0; i < fams.size(); ++i) {
            for (std::size_t j = i + 1; j < fams.size(); ++j) {
                std::int64_t all_gt = 0, all_eq = 0, all_lt = 0;
                const auto emit = [&](const std::string& reader, std::int64_t gt, std::int64_t eq, std::int64_t lt) {
                    auto entry = sign_test_json(sign_test(gt, lt));
                    entry["region"] = region;
                    entry["pair"] = {fams[i], fams[j]};
                    entry["reader"] = reader;
                    entry["n_eq"] = eq;
                    comparisons.push_back(std::move(entry));
                };
                for (const auto& [reader, cases] : readers) {
                    std::int64_t gt = 0, eq = 0, lt = 0;
                    for (const auto& [case_id, by_family] : cases) {
                        const auto a = by_family.find(fams[i]), b = by_family.find(fams[j]);
                        if (a == by_family.end() || b == by_family.end()) continue;
                        switch (lexicographic_compare(select_best(a->second), select_best(b->second))) {
                            case Outcome::dl_gt_ir: ++gt; break;
                            case Outcome::equal: ++eq; break;
                            case Outcome::dl_lt_ir: ++lt; break;
                        }
                    }
                    emit(reader, gt, eq, lt);
                    all_gt += gt;
                    all_eq += eq;
                    all_lt += lt;
                }
                emit("*", all_gt, all_eq, all_lt);
            }
        }

        // Kappa over images (case, method, depth) that both readers scored.
        using Item = std::tuple<std::string, std::string, int>;
        std::map<std::string, std::map<Item, const RatingRecord*>> by_reader;
        for (const auto& r : ratings) {
            if (r.region == region) by_reader[r.reader_id][{r.case_id, r.method, r.depth.value_or(0)}] = &r;
        }
        std::vector<std::string> ids;
        for (const auto& entry : by_reader) ids.push_back(entry.first);
        for (const char* score : {"noise", "fidelity"}) {
            nlohmann::json matrix = nlohmann::json::array();
            for (const auto& ra : ids) {
                nlohmann::json row = nlohmann::json::array();
                for (const auto& rb : ids) {
                    std::vector<int> va, vb;
                    for (const auto& [item, rec] : by_reader[ra]) {
                        auto other = by_reader[rb].find(item);
                        if (other == by_reader[rb].end()) continue;
                        const bool noise = std::string(score) == "noise";
                        va.push_back(noise ? rec->noise : rec->fidelity);
                        vb.push_back(noise ? other->second->noise : other->second->fidelity);
                    }
                    row.push_back(va.empty() ? nlohmann::json(nullptr) : nlohmann::json(cohen_kappa(va, vb).kappa));
                }
                matrix.push_back(std::move(row));
            }
            kappas.push_back({{"region", region}, {"score", score}, {"readers", ids}, {"matrix", matrix}});
        }
    }
    return {{"ratings", ratings.size()}, {"alpha", kSignificanceLevel}, {"comparisons", comparisons}, {"kappa", kappas}};
}

}  // namespace mapnn::stats
