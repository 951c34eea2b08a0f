#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "skybox/site.hpp"
#include "skybox/stats.hpp"

using namespace skybox;

namespace {

Site make_site(const std::string& id, std::vector<double> samples, double capacity = 1000) {
    Site s;
    s.site_id = id;
    s.trace.site_id = id;
    s.trace.capacity_watts = capacity;
    s.trace.samples = std::move(samples);
    return s;
}

/// Two-point square wave around the mean: cov = amplitude / mean.
std::vector<double> square(double mean, double amplitude, std::size_t n = 24) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i % 2 == 0 ? mean - amplitude : mean + amplitude;
    return out;
}

}  // namespace

TEST_CASE("constant trace ranks before a square wave") {
    std::vector<Site> sites;
    sites.push_back(make_site("B", square(500, 200)));
    sites.push_back(make_site("A", std::vector<double>(24, 500.0)));
    const auto ranked = rank_sites(sites, 0);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].site_id == "A");
    CHECK(ranked[0].cov == 0.0);
    CHECK(ranked[1].site_id == "B");
}

TEST_CASE("ranking is ascending in CoV") {
    // covs 0.1 / 0.3 / 0.2 by construction (amplitude / mean).
    std::vector<Site> sites;
    sites.push_back(make_site("x", square(100, 10)));
    sites.push_back(make_site("y", square(100, 30)));
    sites.push_back(make_site("z", square(100, 20)));
    const auto ranked = rank_sites(sites, 0);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].cov == Catch::Approx(cov(square(100, 10))));
    CHECK(ranked[0].cov < ranked[1].cov);
    CHECK(ranked[1].cov < ranked[2].cov);
    CHECK(ranked[0].site_id == "x");
    CHECK(ranked[1].site_id == "z");
    CHECK(ranked[2].site_id == "y");
}

TEST_CASE("ties break by stable power then site id") {
    std::vector<Site> sites;
    sites.push_back(make_site("b", std::vector<double>(8, 300.0)));
    sites.push_back(make_site("a", std::vector<double>(8, 300.0)));
    auto ranked = rank_sites(sites, 0);
    CHECK(ranked[0].site_id == "a");
    CHECK(ranked[1].site_id == "b");

    sites.clear();
    sites.push_back(make_site("low", std::vector<double>(8, 100.0)));
    sites.push_back(make_site("high", std::vector<double>(8, 400.0)));
    ranked = rank_sites(sites, 0);  // both cov 0; higher floor first
    CHECK(ranked[0].site_id == "high");
}

TEST_CASE("degenerate traces rank last with a flag, not dropped") {
    std::vector<Site> sites;
    sites.push_back(make_site("dead", std::vector<double>(8, 0.0)));
    sites.push_back(make_site("live", square(100, 10)));
    const auto ranked = rank_sites(sites, 0);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].site_id == "live");
    CHECK(ranked[1].site_id == "dead");
    CHECK_FALSE(ranked[1].cov_defined);
    CHECK(ranked[0].cov_defined);
}

TEST_CASE("select_top basics") {
    std::vector<Site> sites;
    for (int i = 0; i < 6; ++i)
        sites.push_back(make_site("s" + std::to_string(i), square(100, 5 + i)));
    const auto ranked = rank_sites(sites, 0);

    const auto all = select_top(ranked, 6);
    CHECK(all.site_ids.size() == 6);
    CHECK_FALSE(all.shortfall);
    for (std::size_t i = 0; i < 6; ++i) CHECK(all.site_ids[i] == ranked[i].site_id);

    CHECK(select_top(ranked, 0).site_ids.empty());

    const auto two = select_top(ranked, 2);
    CHECK(two.site_ids == std::vector<std::string>{ranked[0].site_id, ranked[1].site_id});

    const auto over = select_top(ranked, 9);
    CHECK(over.site_ids.size() == 6);
    CHECK(over.shortfall);
}

TEST_CASE("ranking is a deterministic permutation of the input ids") {
    std::vector<Site> sites;
    for (int i = 0; i < 5; ++i)
        sites.push_back(make_site("p" + std::to_string(i), square(50 + 10 * i, 4 + i)));
    const auto a = rank_sites(sites, 0);
    const auto b = rank_sites(sites, 0);
    REQUIRE(a.size() == sites.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].site_id == b[i].site_id);
    std::set<std::string> ids;
    for (const auto& r : a) ids.insert(r.site_id);
    CHECK(ids.size() == sites.size());
}

TEST_CASE("removing a non-selected site never changes the selected set") {
    std::vector<Site> sites;
    for (int i = 0; i < 6; ++i)
        sites.push_back(make_site("q" + std::to_string(i), square(100, 3 + 2 * i)));
    const auto selected = select_top(rank_sites(sites, 0), 3).site_ids;
    for (std::size_t drop = 0; drop < sites.size(); ++drop) {
        const std::string dropped = sites[drop].site_id;
        if (std::find(selected.begin(), selected.end(), dropped) != selected.end()) continue;
        std::vector<Site> fewer;
        for (std::size_t i = 0; i < sites.size(); ++i)
            if (i != drop) fewer.push_back(sites[i]);
        CHECK(select_top(rank_sites(fewer, 0), 3).site_ids == selected);
    }
}

TEST_CASE("ranking csv has the documented columns") {
    std::vector<Site> sites;
    sites.push_back(make_site("only", square(100, 10)));
    const std::string body = ranking_to_csv(rank_sites(sites, 0));
    CHECK(body.rfind("site_id,cov,stable_power\n", 0) == 0);
    CHECK(body.find("only,") != std::string::npos);
}
