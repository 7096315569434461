export { QafactAnnotator, AUTO_BADGE } from "./qafact-annotator.js";
export { ServiceClient } from "./api.js";
export { SyncEngine } from "./queue.js";
export * from "./state.js";
export * from "./types.js";
