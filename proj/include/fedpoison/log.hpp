#pragma once

namespace fedpoison {

/// stderr logger; level from FEDPOISON_LOG (error, info, debug; default info).
void init_logging();

}  // namespace fedpoison
