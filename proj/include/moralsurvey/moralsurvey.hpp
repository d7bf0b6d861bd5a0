#pragma once

// Umbrella header: survey data model, question-form rendering, response
// collection, semantic mapping, and the statistical toolkit.

#include "moralsurvey/agreement.hpp"
#include "moralsurvey/config.hpp"
#include "moralsurvey/curation.hpp"
#include "moralsurvey/dataset.hpp"
#include "moralsurvey/forms.hpp"
#include "moralsurvey/gateway.hpp"
#include "moralsurvey/log.hpp"
#include "moralsurvey/mapper.hpp"
#include "moralsurvey/pipeline.hpp"
#include "moralsurvey/stats.hpp"
#include "moralsurvey/text.hpp"
