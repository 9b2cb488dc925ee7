#ifndef DREST_CSV_HPP
#define DREST_CSV_HPP

#include <string>

#include "drest/dataset.hpp"

namespace drest {

// Strict CSV reader: header row required, every retained column numeric,
// missing or malformed cells rejected with row and column context, exposure
// restricted to {0,1}. All columns other than the exposure and outcome are
// taken as covariates.
Dataset ingest_csv(const std::string& path, const std::string& exposure_name,
                   const std::string& outcome_name);

// Writes exposure, outcome, and covariates with shortest-round-trip number
// formatting, so re-ingesting reproduces the values bit-for-bit.
void write_dataset_csv(const std::string& path, const Dataset& data);

}  // namespace drest

#endif
