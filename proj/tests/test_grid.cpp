#include <gtest/gtest.h>

#include <cmath>

#include "odpp/covariates.hpp"
#include "odpp/errors.hpp"
#include "odpp/grid.hpp"
#include "odpp/rng.hpp"

using namespace odpp;

TEST(RegularGrid, TwoByTwoUnitSquare) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 2, 2);
  ASSERT_EQ(g.size(), 4);
  const double cx[] = {0.25, 0.75, 0.25, 0.75};
  const double cy[] = {0.25, 0.25, 0.75, 0.75};
  for (int k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(g.cell(k).std_area, 0.25);
    EXPECT_DOUBLE_EQ(g.cell(k).representative.x(), cx[k]);
    EXPECT_DOUBLE_EQ(g.cell(k).representative.y(), cy[k]);
  }
}

TEST(RegularGrid, SingleCell) {
  const GridSpec g = build_regular_grid({0, 2, 0, 1}, 1, 1);
  ASSERT_EQ(g.size(), 1);
  EXPECT_DOUBLE_EQ(g.cell(0).std_area, 1.0);
  EXPECT_DOUBLE_EQ(g.cell(0).raw_area, 2.0);
  EXPECT_EQ(g.cell(0).representative, Point(1.0, 0.5));
}

TEST(RegularGrid, AreasSumToOne) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 61, 5);
  ASSERT_EQ(g.size(), 305);
  EXPECT_NEAR(g.std_areas().sum(), 1.0, 1e-12);
}

TEST(RegularGrid, RejectsBadShapes) {
  EXPECT_THROW(build_regular_grid({0, 1, 0, 1}, 0, 3), Error);
  EXPECT_THROW(build_regular_grid({0, 0, 0, 1}, 2, 2), Error);
}

TEST(RegularGrid, HalfOpenEdges) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 2, 2);
  EXPECT_EQ(g.locate({0.5, 0.1}), 1);   // shared x edge goes to the larger index
  EXPECT_EQ(g.locate({0.1, 0.5}), 2);   // shared y edge likewise
  EXPECT_EQ(g.locate({1.0, 1.0}), 3);   // final cell is closed
  EXPECT_EQ(g.locate({0.0, 0.0}), 0);
  EXPECT_FALSE(g.locate({1.0001, 0.5}).has_value());
  EXPECT_FALSE(g.locate({-1e-9, 0.5}).has_value());
}

TEST(AssignCounts, EmptyAndSingle) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 2, 2);
  EXPECT_EQ(assign_counts(PointPattern{}, g), Eigen::VectorXi::Zero(4));
  PointPattern p;
  p.points = {{0.8, 0.2}};
  const Eigen::VectorXi c = assign_counts(p, g);
  EXPECT_EQ(c, (Eigen::VectorXi(4) << 0, 1, 0, 0).finished());
}

TEST(AssignCounts, ConservesTotalWithinBinomialEnvelope) {
  const GridSpec g = build_regular_grid({0, 10, 0, 10}, 10, 10);
  Rng rng(3);
  PointPattern p;
  for (int i = 0; i < 1000; ++i) p.points.emplace_back(rng.uniform(0, 10), rng.uniform(0, 10));
  const Eigen::VectorXi c = assign_counts(p, g);
  EXPECT_EQ(c.sum(), 1000);
  // Binomial(1000, 0.01): P(X > 24) is about 1e-4 per cell.
  EXPECT_LE(c.maxCoeff(), 24);
}

TEST(AssignCounts, OutsidePointNamesIndex) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 2, 2);
  PointPattern p;
  p.points = {{0.5, 0.5}, {2.0, 0.5}};
  try {
    assign_counts(p, g);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find('1'), std::string::npos);
  }
}

TEST(MembershipGrid, NormalizesAreasAndCentroids) {
  const std::vector<int> ids{0, 0, 1};
  const std::vector<Point> pts{{0, 0}, {2, 0}, {5, 5}};
  const std::vector<double> areas{3.0, 1.0};
  const GridSpec g = grid_from_membership(ids, pts, areas);
  EXPECT_EQ(g.kind(), GridSpec::Kind::Membership);
  EXPECT_DOUBLE_EQ(g.cell(0).std_area, 0.75);
  EXPECT_DOUBLE_EQ(g.cell(1).std_area, 0.25);
  EXPECT_EQ(g.cell(0).representative, Point(1, 0));
  PointPattern p;
  p.points = pts;
  p.cell_ids = ids;
  EXPECT_EQ(assign_counts(p, g), Eigen::Vector2i(2, 1));
}

TEST(MembershipGrid, EqualBlocks) {
  const std::vector<double> areas(90, 2.5);
  std::vector<Point> reps;
  for (int i = 0; i < 90; ++i) reps.emplace_back(i % 10, i / 10);
  const GridSpec g = grid_from_membership({}, {}, areas, reps);
  for (const auto& c : g.cells()) EXPECT_NEAR(c.std_area, 1.0 / 90.0, 1e-15);
}

TEST(MembershipGrid, Errors) {
  const std::vector<double> areas{1.0, 1.0};
  const std::vector<Point> pts{{0, 0}};
  const std::vector<int> bad{5};
  EXPECT_THROW(grid_from_membership(bad, pts, areas), DataError);
  const std::vector<int> ok{0};
  EXPECT_THROW(grid_from_membership(ok, pts, areas), GeometryError);  // cell 1 has no members
  const std::vector<double> zero{1.0, 0.0};
  EXPECT_THROW(grid_from_membership(ok, pts, zero), GeometryError);
}

TEST(MembershipGrid, NoGeometryToSample) {
  const std::vector<double> areas{1.0};
  const GridSpec g = grid_from_membership({}, {}, areas, std::vector<Point>{{0, 0}});
  Rng rng(1);
  EXPECT_THROW(g.sample_in_cell(0, rng), GeometryError);
}

TEST(RegularGrid, SampleInCellStaysInside) {
  const GridSpec g = build_regular_grid({0, 3, 0, 2}, 3, 2);
  Rng rng(2);
  for (int k = 0; k < g.size(); ++k) {
    for (int i = 0; i < 50; ++i) EXPECT_EQ(g.locate(g.sample_in_cell(k, rng)), k);
  }
}

TEST(Covariates, SampleSdStandardization) {
  const CovariateTable t = make_covariate_table({"a"}, Eigen::Vector3d(1, 2, 3));
  const CovariateTable s = standardize_covariates(t);
  // Divisor K - 1: sd of (1, 2, 3) is 1.
  EXPECT_NEAR(s.values(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(s.values(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(s.values(2, 0), 1.0, 1e-15);
}

TEST(Covariates, InterceptUntouchedAndIdempotent) {
  Eigen::MatrixXd v(4, 2);
  v << 1, 3, 1, 7, 1, -2, 1, 0.5;
  const CovariateTable t = make_covariate_table({kInterceptName, "x"}, v);
  const CovariateTable s = standardize_covariates(t);
  EXPECT_EQ(s.values.col(0), Eigen::VectorXd::Ones(4));
  const CovariateTable s2 = standardize_covariates(s);
  EXPECT_LE((s2.values - s.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariates, RoundTrip) {
  Rng rng(4);
  Eigen::MatrixXd v(20, 3);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 3; ++j) v(i, j) = 10.0 * rng.normal() + j * 100.0;
  }
  const CovariateTable s = standardize_covariates(make_covariate_table({"a", "b", "c"}, v));
  EXPECT_LE((destandardize(s) - v).cwiseAbs().maxCoeff(), 1e-10);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(s.values.col(j).mean(), 0.0, 1e-12);
}

TEST(Covariates, ZeroVarianceAndUnknownColumn) {
  const CovariateTable t = make_covariate_table({"flat"}, Eigen::Vector3d(2, 2, 2));
  EXPECT_THROW(standardize_covariates(t), Error);
  EXPECT_THROW(t.column("missing"), ConfigError);
}

TEST(Covariates, DesignMatrix) {
  Eigen::MatrixXd v(3, 2);
  v << 1, 4, 2, 5, 3, 6;
  const CovariateTable t = make_covariate_table({"a", "b"}, v);
  const Eigen::MatrixXd x = design_matrix(t, {"b"});
  ASSERT_EQ(x.cols(), 2);
  EXPECT_EQ(x.col(0), Eigen::Vector3d::Ones());
  EXPECT_EQ(x.col(1), Eigen::Vector3d(4, 5, 6));
  EXPECT_EQ(intercept_design(5), Eigen::MatrixXd::Ones(5, 1));
}
