#pragma once

// Batch front end: CSV ingestion, config parsing and the fit / fit-reverse /
// construct / simulate / verify commands.
//
// Exit codes: 0 ok, 1 failed verify check or internal error, 2 config or
// argument error, 3 data or consistency error, 4 convergence or evaluation
// error, 5 identifiability error.

#include <iosfwd>
#include <string>
#include <vector>

#include "assoc/errors.hpp"
#include "assoc/estimator.hpp"
#include "assoc/distfactory.hpp"

namespace assoc::cli {

int exit_code(ErrorCategory c);

// Conditional sample: header "k, v..., z..., [weight]". Column names starting
// with 'v' are outcome features, with 'z' covariates; "weight" is optional.
// Rows with equal (k, z) are merged.
ConditionalDataset read_conditional_csv(std::istream& in);
ConditionalDataset read_conditional_csv(const std::string& path);

// Two-way table: the header row holds the column feature vectors, the first
// cell of each later row that row's feature vector. Vector components are
// separated by ';'. Row and column 0 are the reference levels.
ContingencyTable read_table_csv(std::istream& in);
ContingencyTable read_table_csv(const std::string& path);
FiniteJoint read_joint_csv(const std::string& path);

void write_table_csv(std::ostream& out, const Matrix& values, const Matrix& z_support,
                     const Matrix& v_support);

// True when the first header cell is "k", i.e. a conditional sample.
bool looks_conditional(const std::string& path);

// Runs one command; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace assoc::cli
