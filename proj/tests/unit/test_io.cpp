#include <sstream>

#include <gtest/gtest.h>

#include "cecluster/io.hpp"
#include "support/fixtures.hpp"

using namespace cecluster;

namespace {

io::Table parse(const std::string& text) {
    std::istringstream in(text);
    return io::parse_table(in, "test");
}

}  // namespace

TEST(Table, MetadataHeaderAndRows) {
    const auto t = parse("# a: 1\n# b: two words\nx,y\n1,2\n\n3,4\n");
    EXPECT_EQ(t.meta("a").value(), "1");
    EXPECT_EQ(t.meta("b").value(), "two words");
    EXPECT_EQ(t.header, (std::vector<std::string>{"x", "y"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.line_numbers[1], 6u);
}

TEST(Table, RaggedRowReportsLine) {
    try {
        parse("x,y\n1,2\n3\n");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Table, RealsRoundTrip) {
    for (const double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23}) {
        EXPECT_EQ(io::parse_real(io::format_real(v), 0), v);
    }
    EXPECT_TRUE(std::isnan(io::parse_real("NA", 0)));
    EXPECT_THROW(io::parse_real("abc", 4), DataError);
}

TEST(Panel, LongFormRoundTrip) {
    const auto t = parse(
        "site_id,time_index,variable_name,value\n"
        "A,2,x,1.5\nA,1,x,0.5\nA,1,y,3\nA,2,y,4\n"
        "B,1,x,7\nB,2,x,8\nB,1,y,9\nB,2,y,10\n");
    const auto p = io::panel_from_table(t);
    EXPECT_EQ(p.site_ids, (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(p.variable_names, (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(p.sites[0](0, 0), 0.5);  // time 1 first
    EXPECT_EQ(p.sites[0](1, 0), 1.5);
    EXPECT_EQ(p.sites[1](1, 1), 10.0);
    EXPECT_EQ(p.margins, Margins::raw);
    const auto back = io::panel_from_table(io::panel_to_table(p));
    EXPECT_TRUE(back.sites[1] == p.sites[1]);
    EXPECT_EQ(io::panel_fingerprint(back), io::panel_fingerprint(p));
}

TEST(Panel, DuplicateAndMissingCells) {
    EXPECT_THROW(io::panel_from_table(parse("site_id,time_index,variable_name,value\nA,1,x,1\nA,1,x,2\n")), DataError);
    EXPECT_THROW(io::panel_from_table(parse("site_id,time_index,variable_name,value\nA,1,x,1\nA,2,x,2\nB,1,x,3\n")),
                 DataError);
    EXPECT_THROW(io::panel_from_table(parse("site,time_index,variable_name,value\nA,1,x,1\n")), DataError);
}

TEST(Fits, RoundTripIsExact) {
    auto f = fixture::make_fit("S1", 0.3, 0.2, 0.1, 1.0, 2);
    f.sigma << 1.0, 0.25, 0.25, 2.0 / 3.0;
    f.stage1_mu = Eigen::Vector2d(0.1, 0.2);
    f.stage1_sd = Eigen::Vector2d(1.1, 0.9);
    f.nll = 123.456;
    const auto table = io::fits_to_table({f}, {"a", "b", "c"}, "abc123");
    std::ostringstream out;
    io::write_table(out, table);
    std::istringstream in(out.str());
    const auto records = io::fits_from_table(io::parse_table(in, "fits"));
    ASSERT_EQ(records.fits.size(), 1u);
    EXPECT_EQ(records.fingerprint, "abc123");
    const auto& g = records.fits[0];
    EXPECT_TRUE(g.alpha == f.alpha && g.beta == f.beta && g.mu == f.mu && g.sigma == f.sigma);
    EXPECT_EQ(g.threshold_u, f.threshold_u);
    EXPECT_EQ(g.nll, f.nll);
}

TEST(Fits, RowFingerprintMustMatchFile) {
    const auto f = fixture::make_fit("S1", 0.3, 0.2, 0.1, 1.0);
    auto table = io::fits_to_table({f}, {"a", "b"}, "abc123");
    table.rows[0].back() = "other";
    EXPECT_THROW(io::fits_from_table(table), DataError);
}

TEST(Matrix, RoundTripAndValidation) {
    DissimMatrix m;
    m.site_ids = {"p", "q"};
    m.values = Eigen::Matrix2d{{0.0, 0.123}, {0.123, 0.0}};
    m.cond_var = 1;
    m.fingerprint = "ff";
    auto table = io::matrix_to_table(m, {{"q", "0.9"}});
    EXPECT_EQ(table.meta("source").value(), "cond_var:2");
    const auto back = io::matrix_from_table(table);
    EXPECT_TRUE(back.values == m.values);
    EXPECT_EQ(back.cond_var, m.cond_var);
    table.rows[0][2] = "0.5";  // breaks symmetry
    EXPECT_THROW(io::matrix_from_table(table), DataError);
}
