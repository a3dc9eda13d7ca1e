#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapnn/error.hpp"

namespace mapnn::stats {

/// A score outside the 4-point scale.
class ScoreOutOfRange : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// One reader's scores for one image. `method` is an opaque label; the
/// family it belongs to is the label with trailing digits, '-' and '_'
/// removed ("DL2" -> "DL").
struct RatingRecord {
    std::string case_id;
    std::string reader_id;
    std::string method;
    std::optional<int> depth;
    int noise = 1;
    int fidelity = 1;
    std::string region = "abdomen";

    void validate() const;  // throws ScoreOutOfRange
};

/// Throws InvalidArgument for missing or mistyped fields and
/// ScoreOutOfRange for scores outside 1..4.
RatingRecord rating_from_json(const nlohmann::json& j);
nlohmann::json rating_to_json(const RatingRecord& r);
/// One record per non-blank line.
std::vector<RatingRecord> read_ratings_jsonl(std::istream& in);

std::string method_family(const std::string& label);

enum class Outcome { dl_gt_ir, equal, dl_lt_ir };

std::string outcome_name(Outcome o);

/// Fidelity decides; noise breaks a fidelity tie.
Outcome lexicographic_compare(const RatingRecord& dl, const RatingRecord& ir);

/// Maximum under (fidelity, noise); ties go to the lowest depth (records
/// without a depth last), then the smallest label.
const RatingRecord& select_best(const std::vector<RatingRecord>& family);

/// numerator / 2^log2_denominator, exact.
struct DyadicProbability {
    unsigned __int128 numerator = 1;
    int log2_denominator = 0;

    double value() const;
};

inline constexpr int kMaxExactSignTestN = 125;
inline constexpr double kSignificanceLevel = 0.05;

struct SignTestResult {
    std::int64_t n_gt = 0;
    std::int64_t n_lt = 0;
    DyadicProbability p1;  // P(X >= n_gt): evidence that DL > IR
    DyadicProbability p2;  // P(X <= n_gt): evidence that DL < IR
    bool reject_h1 = false;  // p1 < 0.05
    bool reject_h2 = false;  // p2 < 0.05
};

/// Exact one-sided binomial tests at success probability 1/2 over the
/// discordant pairs (ties excluded by the caller). n_gt + n_lt may not
/// exceed kMaxExactSignTestN.
SignTestResult sign_test(std::int64_t n_gt, std::int64_t n_lt);

struct KappaResult {
    double p_o = 0;
    double p_e = 0;
    double kappa = 0;
};

/// Cohen's kappa over categories 1..4; kappa = 1 when p_e = 1.
KappaResult cohen_kappa(const std::vector<int>& a, const std::vector<int>& b);

/// Report over a rating log: for every region, family pair (A, B) with A < B
/// and reader (plus "*" pooling all readers), the best-of-family comparison
/// counts per case with both sign tests; and per region and score the
/// pairwise kappa matrix over images rated by both readers.
nlohmann::json stats_report(const std::vector<RatingRecord>& ratings);

/// Report for bare counts (--counts mode).
nlohmann::json sign_test_json(const SignTestResult& r);

}  // namespace mapnn::stats
