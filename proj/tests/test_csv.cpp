#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "vnet/csv.hpp"

using namespace vnet;

TEST(Csv, QuotesFieldsWithSeparatorsAndQuotes) {
    std::ostringstream out;
    csv::write_row(out, {"plain", "a,b", "say \"hi\"", "line\nbreak"});
    EXPECT_EQ(out.str(), "plain,\"a,b\",\"say \"\"hi\"\"\",\"line\nbreak\"\n");
}

TEST(Csv, RowRoundTrip) {
    const csv::Row row = {"", "x,y", "\"", "multi\nline", "tail"};
    std::stringstream io;
    csv::write_row(io, row);
    csv::Row back;
    ASSERT_TRUE(csv::read_row(io, back));
    EXPECT_EQ(back, row);
    EXPECT_FALSE(csv::read_row(io, back));
}

TEST(Csv, TableColumnLookup) {
    std::istringstream in("a,b\n1,2\n3,4\n");
    const auto t = csv::read_table(in);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1][t.column("b")], "4");
    EXPECT_THROW(t.column("c"), std::runtime_error);
}

TEST(Csv, RaggedRowsRejected) {
    std::istringstream in("a,b\n1\n");
    EXPECT_THROW(csv::read_table(in), std::runtime_error);
}

TEST(Csv, DoublesRoundTripExactly) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5e-17})
        EXPECT_EQ(csv::parse_double(csv::format_double(v)), v);
    EXPECT_TRUE(std::isinf(csv::parse_double(csv::format_double(std::numeric_limits<double>::infinity()))));
    EXPECT_THROW(csv::parse_double("1.5x"), std::runtime_error);
}

TEST(Csv, IntegersParseStrictly) {
    EXPECT_EQ(csv::parse_int<int>("-42"), -42);
    EXPECT_THROW(csv::parse_int<unsigned>("4 "), std::runtime_error);
}
