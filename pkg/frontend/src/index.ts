export * from "./protocol.js";
export * from "./markers.js";
export * from "./heat.js";
export * from "./trace.js";
export * from "./map.js";
export * from "./intervene.js";
export * from "./client.js";
