#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>

#include "vilab/errors.hpp"
#include "vilab/mesh.hpp"
#include "vilab/study.hpp"

using namespace vilab;

namespace {

/// 2 pi int_1^R (r - 1/r)^2 r dr by composite Simpson.
double radial_oracle(double radius, int intervals = 20000) {
  auto f = [](double r) { return (r - 1 / r) * (r - 1 / r) * r; };
  const double h = (radius - 1.0) / intervals;
  double s = f(1.0) + f(radius);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(1.0 + i * h);
  return 2 * std::numbers::pi * s * h / 3.0;
}

ConvergenceRecord rec(std::size_t n, double et, double eq = 1.0) {
  ConvergenceRecord r;
  r.N = n;
  r.err_total = et;
  r.err_quad = eq;
  return r;
}

}  // namespace

TEST(ExactSolution, BoundaryAndContinuity) {
  const ExactRadialSolution u;
  EXPECT_NEAR(u.psi_const, std::log(1.5) - 0.625, 1e-16);
  for (int k = 0; k < 16; ++k) {
    const double t = k * std::numbers::pi / 8;
    EXPECT_NEAR(u.value({1.5 * std::cos(t), 1.5 * std::sin(t)}), 0.0, 1e-15);
    const Point2 in{(1 - 1e-15) * std::cos(t), (1 - 1e-15) * std::sin(t)};
    const Point2 out{(1 + 1e-15) * std::cos(t), (1 + 1e-15) * std::sin(t)};
    EXPECT_NEAR(u.value(in), u.value(out), 1e-15);
    EXPECT_NEAR(u.gradient(in).x, u.gradient(out).x, 1e-14);
    EXPECT_NEAR(u.gradient(in).y, u.gradient(out).y, 1e-14);
  }
  // Gradient matches a central difference outside the contact set.
  const Point2 x{0.9, 0.8};
  const double h = 1e-6;
  EXPECT_NEAR(u.gradient(x).x, (u.value({x.x + h, x.y}) - u.value({x.x - h, x.y})) / (2 * h), 1e-8);
  EXPECT_THROW(ExactRadialSolution(0.9), PreconditionError);
}

TEST(H1Error, ZeroCoefficientsMatchRadialOracle) {
  const double oracle = radial_oracle(1.5);
  const double closed = 2 * std::numbers::pi * ((std::pow(1.5, 4) / 4 - 1.5 * 1.5 + std::log(1.5)) - (0.25 - 1.0));
  EXPECT_NEAR(oracle, closed, 1e-13);
  EXPECT_NEAR(oracle, 1.0750, 1e-4);
  auto mesh = std::make_shared<const Mesh>(uniform_disk_mesh(1.5, 3));
  FESpace space(mesh, 1);
  const auto e = h1_error(space, Eigen::VectorXd::Zero(space.num_total()), ExactRadialSolution());
  EXPECT_NEAR(e.global, std::sqrt(oracle), 1e-10);
  EXPECT_EQ(e.per_element.size(), mesh->num_elements());
}

TEST(H1Error, IdenticalVectorsAndMismatch) {
  auto mesh = std::make_shared<const Mesh>(uniform_disk_mesh(1.5, 1));
  FESpace s2(mesh, 2), s3(mesh, 3);
  const Eigen::VectorXd c = Eigen::VectorXd::Random(s2.num_total());
  EXPECT_EQ(h1_error(s2, c, s2, c).global, 0.0);
  EXPECT_THROW(h1_error(s2, c, s3, Eigen::VectorXd::Zero(s3.num_total())), PreconditionError);
}

TEST(H1Error, InterpolantConvergence) {
  const ExactRadialSolution u;
  std::vector<double> h, err;
  for (int l = 1; l <= 4; ++l) {
    auto mesh = std::make_shared<const Mesh>(uniform_disk_mesh(1.5, l));
    FESpace space(mesh, 2);
    const Eigen::VectorXd c = space.expand(space.interpolate([&](const Point2& x) { return u.value(x); }));
    h.push_back(mesh->max_diameter());
    err.push_back(h1_error(space, c, u).global);
  }
  const double rate = std::log(err[2] / err[3]) / std::log(h[2] / h[3]);
  EXPECT_GE(rate, 1.4);
}

TEST(Dorfler, Examples) {
  EXPECT_EQ(dorfler_mark({4, 3, 2, 1}, 0.5), (std::vector<int>{0, 1}));
  EXPECT_EQ(dorfler_mark({1, 0, 3, 2}, 1.0), (std::vector<int>{0, 2, 3}));
  EXPECT_EQ(dorfler_mark({2, 5, 5, 1}, 1e-9), (std::vector<int>{1}));
  EXPECT_EQ(dorfler_mark({1, 2, 3, 4}, 0.5), (std::vector<int>{2, 3}));
  EXPECT_THROW(dorfler_mark({1, 2}, 0.0), PreconditionError);
  EXPECT_THROW(dorfler_mark({1, 2}, 1.5), PreconditionError);
}

TEST(Eoc, SyntheticPowerLaws) {
  std::vector<ConvergenceRecord> half, three_half, flat;
  for (int l = 0; l < 6; ++l) {
    const double n = 100.0 * std::pow(4.0, l);
    half.push_back(rec(static_cast<std::size_t>(n), 3.0 * std::pow(n, -0.5)));
    three_half.push_back(rec(static_cast<std::size_t>(n), 0.7 * std::pow(n, -1.5)));
    flat.push_back(rec(static_cast<std::size_t>(n), 0.25));
  }
  EXPECT_NEAR(eoc(half, RecordField::Total), 0.5, 1e-12);
  EXPECT_NEAR(eoc(three_half, RecordField::Total), 1.5, 1e-12);
  EXPECT_NEAR(eoc(flat, RecordField::Total), 0.0, 1e-12);
  EXPECT_NEAR(eoc_fit({10, 100, 1000}, {1, 0.1, 0.01}, 3), 1.0, 1e-12);
}

TEST(Eoc, SkipsUnusableRecords) {
  std::vector<ConvergenceRecord> r;
  for (int l = 0; l < 5; ++l) r.push_back(rec(100u << (2 * l), std::pow(100.0 * std::pow(4.0, l), -1.0)));
  r[3].failed = true;
  r[4].quad_floor = true;
  // Quad field: records 3 and 4 unusable, records 0..2 have constant error.
  EXPECT_NEAR(eoc(r, RecordField::Quad), 0.0, 1e-12);
  // Total field ignores the floor flag but still skips the failed level.
  EXPECT_NEAR(eoc(r, RecordField::Total), 1.0, 1e-12);

  std::vector<ConvergenceRecord> one{rec(10, 1.0)};
  EXPECT_THROW(eoc(one, RecordField::Total), UndefinedRateError);
  std::vector<ConvergenceRecord> zero{rec(10, 0.0), rec(40, 0.0)};
  EXPECT_THROW(eoc(zero, RecordField::Total), UndefinedRateError);
}

TEST(StudyConfig, ModesAndFileNames) {
  EXPECT_EQ(parse_mode("h-uniform"), StudyMode::HUniform);
  EXPECT_EQ(parse_mode("h-adaptive"), StudyMode::HAdaptive);
  EXPECT_EQ(parse_mode("p-uniform"), StudyMode::PUniform);
  EXPECT_THROW(parse_mode("hp"), PreconditionError);
  EXPECT_STREQ(to_string(StudyMode::HAdaptive), "h-adaptive");
  EXPECT_EQ(campaign_file_name(StudyMode::HUniform, 2, 1), "h2_j1.csv");
  EXPECT_EQ(campaign_file_name(StudyMode::HAdaptive, 3, 11), "a3_j11.csv");
  EXPECT_EQ(campaign_file_name(StudyMode::PUniform, 10, 5), "p10_j5.csv");
}

TEST(Campaign, SmallUniformRun) {
  StudyConfig c;
  c.p = 1;
  c.q_offsets = {0, 2, 11};
  c.levels = 4;
  const auto r = run_campaign(c);
  ASSERT_EQ(r.records.size(), 3u);
  for (const auto& recs : r.records) {
    ASSERT_EQ(recs.size(), 4u);
    for (std::size_t l = 1; l < recs.size(); ++l) {
      EXPECT_GT(recs[l].N, recs[l - 1].N);
      EXPECT_LT(recs[l].h, recs[l - 1].h);
    }
    for (const auto& x : recs) {
      EXPECT_FALSE(x.failed);
      EXPECT_GE(x.err_total, 0.0);
      EXPECT_GE(x.err_quad, 0.0);
    }
  }
  for (const auto& x : r.for_offset(11)) EXPECT_EQ(x.err_quad, 0.0);
  // The reference records agree with the exact error of each j to leading order.
  EXPECT_NEAR(r.for_offset(2).back().err_total, r.for_offset(11).back().err_total,
              0.05 * r.for_offset(11).back().err_total);
  EXPECT_THROW(r.for_offset(7), PreconditionError);
}

TEST(Campaign, UnderIntegrationRecordsFailure) {
  StudyConfig c;
  c.p = 2;
  c.q_offsets = {-1, 11};
  c.levels = 2;
  const auto r = run_campaign(c);
  for (const auto& x : r.for_offset(-1)) EXPECT_TRUE(x.failed);
  for (const auto& x : r.for_offset(11)) EXPECT_FALSE(x.failed);
}

TEST(Campaign, PVersionAndAdaptiveShapes) {
  StudyConfig pc;
  pc.mode = StudyMode::PUniform;
  pc.p = 3;
  pc.q_offsets = {11};
  const auto pr = run_campaign(pc);
  ASSERT_EQ(pr.records[0].size(), 3u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(pr.records[0][k].degree, k + 1);

  StudyConfig ac;
  ac.mode = StudyMode::HAdaptive;
  ac.p = 2;
  ac.q_offsets = {11};
  ac.levels = 5;
  const auto ar = run_campaign(ac);
  ASSERT_EQ(ar.records[0].size(), 5u);
  EXPECT_LT(ar.records[0].back().err_total, ar.records[0].front().err_total);
}

TEST(Campaign, CsvOutput) {
  const auto dir = std::filesystem::temp_directory_path() / "vilab_study_test";
  std::filesystem::create_directories(dir);
  std::vector<ConvergenceRecord> r{rec(10, 0.5, 0.1), rec(40, 0.25, 0.0)};
  r[1].quad_floor = true;
  const auto path = (dir / "h1_j0.csv").string();
  write_campaign_csv(path, r);
  std::ifstream f(path);
  std::string header, row;
  std::getline(f, header);
  EXPECT_EQ(header, "level,N,h,err_total,err_quad,eoc_total,eoc_quad");
  std::getline(f, row);
  EXPECT_EQ(row.substr(0, 5), "0,10,");
  EXPECT_NE(row.find("5.0000000000000000e-01"), std::string::npos);
  write_loglog_csv((dir / "loglog.csv").string(), r);
  EXPECT_TRUE(std::filesystem::exists(dir / "loglog.csv"));
}
