/**
 * Mesh projection for the preview pane: orbit/zoom camera, perspective
 * projection, painter-sorted shaded faces plus wireframe edges. Pure
 * functions over the mesh JSON; the canvas layer just replays the
 * returned draw list.
 */
const MIN_PITCH = -Math.PI / 2 + 0.01;
const MAX_PITCH = Math.PI / 2 - 0.01;
const LIGHT = normalize([0.45, 0.8, 0.6]);
function sub(a, b) {
    return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}
function cross(a, b) {
    return [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
}
function dot(a, b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
function normalize(v) {
    const len = Math.hypot(v[0], v[1], v[2]);
    if (len === 0)
        return [0, 0, 1];
    return [v[0] / len, v[1] / len, v[2] / len];
}
export function meshPositions(mesh) {
    return mesh.vertices.map((v) => [Number(v[0]), Number(v[1]), Number(v[2])]);
}
/** Frame the whole mesh: look at its bounding-box center from 2.5 radii. */
export function defaultCamera(mesh) {
    const positions = meshPositions(mesh);
    if (positions.length === 0) {
        return { yaw: Math.PI / 5, pitch: Math.PI / 8, distance: 5, target: [0, 0, 0] };
    }
    const lo = [Infinity, Infinity, Infinity];
    const hi = [-Infinity, -Infinity, -Infinity];
    for (const p of positions) {
        for (let i = 0; i < 3; i++) {
            lo[i] = Math.min(lo[i], p[i]);
            hi[i] = Math.max(hi[i], p[i]);
        }
    }
    const target = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
    const radius = Math.max(Math.hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]) / 2, 0.5);
    return { yaw: Math.PI / 5, pitch: Math.PI / 8, distance: radius * 2.5, target };
}
export function orbit(camera, dYaw, dPitch) {
    return {
        ...camera,
        yaw: camera.yaw + dYaw,
        pitch: Math.min(MAX_PITCH, Math.max(MIN_PITCH, camera.pitch + dPitch)),
    };
}
export function zoom(camera, factor) {
    return { ...camera, distance: Math.min(1e6, Math.max(0.05, camera.distance * factor)) };
}
export function cameraEye(camera) {
    const horizontal = Math.cos(camera.pitch) * camera.distance;
    return [
        camera.target[0] + Math.sin(camera.yaw) * horizontal,
        camera.target[1] + Math.sin(camera.pitch) * camera.distance,
        camera.target[2] + Math.cos(camera.yaw) * horizontal,
    ];
}
/** Newell's method: robust normal for arbitrary polygons. */
function faceNormal(points) {
    const n = [0, 0, 0];
    for (let i = 0; i < points.length; i++) {
        const p = points[i];
        const q = points[(i + 1) % points.length];
        n[0] += (p[1] - q[1]) * (p[2] + q[2]);
        n[1] += (p[2] - q[2]) * (p[0] + q[0]);
        n[2] += (p[0] - q[0]) * (p[1] + q[1]);
    }
    return normalize(n);
}
export function projectMesh(mesh, camera, width, height) {
    const positions = meshPositions(mesh);
    const eye = cameraEye(camera);
    const forward = normalize(sub(camera.target, eye));
    const right = normalize(cross(forward, [0, 1, 0]));
    const up = cross(right, forward);
    const focal = (0.9 * Math.min(width, height)) / 1.0;
    const near = camera.distance * 0.01;
    const projected = positions.map((p) => {
        const rel = sub(p, eye);
        const depth = dot(rel, forward);
        if (depth < near)
            return null;
        const x = (dot(rel, right) / depth) * focal + width / 2;
        const y = height / 2 - (dot(rel, up) / depth) * focal;
        return [x, y];
    });
    const depths = positions.map((p) => dot(sub(p, eye), forward));
    const faces = [];
    const edgeKeys = new Set();
    const edges = [];
    for (const face of mesh.faces) {
        const corners = face.map((i) => projected[i]);
        if (corners.some((c) => c === null))
            continue;
        const world = face.map((i) => positions[i]);
        const normal = faceNormal(world);
        const shade = 0.25 + 0.75 * Math.abs(dot(normal, LIGHT));
        const depth = face.reduce((acc, i) => acc + depths[i], 0) / face.length;
        faces.push({ points: corners, depth, shade });
        for (let i = 0; i < face.length; i++) {
            const a = face[i];
            const b = face[(i + 1) % face.length];
            const key = a < b ? `${a}-${b}` : `${b}-${a}`;
            if (edgeKeys.has(key))
                continue;
            edgeKeys.add(key);
            edges.push({ a: projected[a], b: projected[b] });
        }
    }
    faces.sort((a, b) => b.depth - a.depth); // farthest first
    return {
        faces,
        edges,
        points: projected.filter((p) => p !== null),
        vertexCount: mesh.vertices.length,
        faceCount: mesh.faces.length,
    };
}
