"""
Three.js Viewer Module

This module handles HTML/Three.js rendering of calibration scenes.
Creates an interactive 3D viewer that colours parts by their material tag.

Usage:
    from threejs_viewer import create_threejs_gltf_viewer

    viewer_html = create_threejs_gltf_viewer(gltf_file_path="scene.gltf", height=500)

    # Display in Streamlit
    import streamlit.components.v1 as components
    components.html(viewer_html, height=520, scrolling=False)
"""

import base64
import json

from file_exporters import prepare_gltf_for_download


# Colours of the `material:<name>` tags written by scene_model
SCENE_MATERIALS = {
    "metal": {"color": 0xb8bcc2, "metalness": 0.6, "roughness": 0.35, "opacity": 1.0},
    "joint": {"color": 0x2d6cdf, "metalness": 0.2, "roughness": 0.4, "opacity": 1.0},
    "keypoint": {"color": 0xf2c230, "metalness": 0.0, "roughness": 0.3, "opacity": 1.0},
    "camera": {"color": 0x2fb36b, "metalness": 0.1, "roughness": 0.5, "opacity": 0.55},
    "estimate": {"color": 0xe0453a, "metalness": 0.1, "roughness": 0.5, "opacity": 0.55},
}
DEFAULT_MATERIAL = {"color": 0x999999, "metalness": 0.2, "roughness": 0.5, "opacity": 1.0}


def embed_gltf(gltf_file_path):
    """Base64 of a GLTF file with its .bin buffers inlined, for a data URI."""
    return base64.b64encode(prepare_gltf_for_download(gltf_file_path)).decode('utf-8')


def create_threejs_gltf_viewer(gltf_file_path, height=500):
    """
    Create a Three.js GLTF viewer for a calibration scene.

    Args:
        gltf_file_path: Path to the GLTF file
        height: Height of the viewer in pixels

    Returns:
        str: HTML string containing the complete Three.js viewer
    """
    gltf_base64 = embed_gltf(gltf_file_path)
    materials_js = json.dumps(SCENE_MATERIALS)
    default_js = json.dumps(DEFAULT_MATERIAL)

    html_template = f"""
    <!DOCTYPE html>
    <html lang="en">
    <head>
        <meta charset="UTF-8">
        <meta name="viewport" content="width=device-width, initial-scale=1.0">
        <title>Calibration Scene Viewer</title>
        <style>
            body {{
                margin: 0;
                padding: 0;
                background: #0e1117;
                font-family: Arial, sans-serif;
                overflow: hidden;
            }}
            #container {{
                width: 100%;
                height: {height}px;
                position: relative;
            }}
            #loading {{
                position: absolute;
                top: 50%;
                left: 50%;
                transform: translate(-50%, -50%);
                color: #ffffff;
                font-size: 1.1em;
                z-index: 100;
            }}
            .legend {{
                position: absolute;
                top: 10px;
                left: 10px;
                background: rgba(0,0,0,0.7);
                padding: 8px 12px;
                border-radius: 8px;
                font-size: 0.8em;
                color: #ffffff;
                z-index: 200;
                line-height: 1.6;
            }}
            .swatch {{
                display: inline-block;
                width: 10px;
                height: 10px;
                border-radius: 2px;
                margin-right: 6px;
            }}
            .controls {{
                position: absolute;
                bottom: 10px;
                left: 10px;
                background: rgba(0,0,0,0.7);
                padding: 10px;
                border-radius: 8px;
                font-size: 0.8em;
                color: #ffffff;
                z-index: 200;
            }}
            .error {{
                color: #ff6b6b;
                background: rgba(255, 0, 0, 0.1);
                padding: 15px;
                border-radius: 8px;
                margin: 20px;
            }}
        </style>
    </head>
    <body>
        <div id="container">
            <div id="loading">Loading scene...</div>
            <div class="legend">
                <div><span class="swatch" style="background:#b8bcc2"></span>Links</div>
                <div><span class="swatch" style="background:#2d6cdf"></span>Joints</div>
                <div><span class="swatch" style="background:#f2c230"></span>Keypoints</div>
                <div><span class="swatch" style="background:#2fb36b"></span>True camera</div>
                <div><span class="swatch" style="background:#e0453a"></span>Estimated camera</div>
            </div>
            <div class="controls">
                <strong>Controls:</strong>&nbsp; Mouse: Rotate &bull; Right-click: Pan &bull; Wheel: Zoom &bull; A: Auto-rotate
            </div>
        </div>

        <script src="https://cdnjs.cloudflare.com/ajax/libs/three.js/r128/three.min.js"></script>
        <script src="https://cdn.jsdelivr.net/npm/three@0.128.0/examples/js/loaders/GLTFLoader.js"></script>
        <script src="https://cdn.jsdelivr.net/npm/three@0.128.0/examples/js/controls/OrbitControls.js"></script>
        <script>
            const loading = document.getElementById('loading');
            const container = document.getElementById('container');

            const scene = new THREE.Scene();
            scene.background = new THREE.Color(0x1a1a1a);
            const camera = new THREE.PerspectiveCamera(50, container.clientWidth / container.clientHeight, 0.1, 1000);
            const renderer = new THREE.WebGLRenderer({{ antialias: true, alpha: true }});
            renderer.outputEncoding = THREE.sRGBEncoding;
            renderer.setSize(container.clientWidth, container.clientHeight);
            container.appendChild(renderer.domElement);
            camera.position.set(5, 4, 5);

            const controls = new THREE.OrbitControls(camera, renderer.domElement);
            controls.enableDamping = true;
            controls.dampingFactor = 0.05;
            controls.autoRotate = false;
            controls.autoRotateSpeed = 1.0;

            scene.add(new THREE.HemisphereLight(0xffffff, 0x222233, 0.7));
            const dirLight = new THREE.DirectionalLight(0xffffff, 0.8);
            dirLight.position.set(5, 10, 7);
            scene.add(dirLight);
            const grid = new THREE.GridHelper(10, 20, 0x444444, 0x2a2a2a);
            scene.add(grid);

            const sceneMaterials = {materials_js};
            const defaultMaterial = {default_js};

            // Match "material:camera" or "materialcamera_3" (GLTF name suffixes)
            function materialFor(meshName) {{
                const match = (meshName || '').match(/material:?([a-zA-Z]+)/);
                const spec = (match && sceneMaterials[match[1]]) || defaultMaterial;
                return new THREE.MeshStandardMaterial({{
                    color: spec.color,
                    metalness: spec.metalness,
                    roughness: spec.roughness,
                    transparent: spec.opacity < 1.0,
                    opacity: spec.opacity
                }});
            }}

            try {{
                const binaryString = atob("{gltf_base64}");
                const bytes = new Uint8Array(binaryString.length);
                for (let i = 0; i < binaryString.length; i++) {{
                    bytes[i] = binaryString.charCodeAt(i);
                }}
                const blob = new Blob([bytes], {{ type: 'model/gltf+json' }});
                const gltfUrl = URL.createObjectURL(blob);

                new THREE.GLTFLoader().load(
                    gltfUrl,
                    function(gltf) {{
                        const model = gltf.scene;
                        const box = new THREE.Box3().setFromObject(model);
                        const center = box.getCenter(new THREE.Vector3());
                        const size = box.getSize(new THREE.Vector3());
                        const scale = 4 / Math.max(size.x, size.y, size.z);
                        model.scale.setScalar(scale);
                        model.position.sub(center.multiplyScalar(scale));

                        model.traverse(function(child) {{
                            if (child.isMesh) {{
                                // GLTFLoader sometimes puts the name on the parent node
                                const meshName = child.name || (child.parent ? child.parent.name : '');
                                child.material = materialFor(meshName);
                            }}
                        }});

                        scene.add(model);
                        controls.target.set(0, 0, 0);
                        controls.update();
                        loading.style.display = 'none';
                        URL.revokeObjectURL(gltfUrl);
                    }},
                    undefined,
                    function(error) {{
                        loading.innerHTML = `<div class="error"><strong>Error loading model:</strong><br>${{error.message || 'Unknown error'}}</div>`;
                    }}
                );
            }} catch (error) {{
                loading.innerHTML = `<div class="error"><strong>Error processing model data:</strong><br>${{error.message}}</div>`;
            }}

            window.addEventListener('keydown', (event) => {{
                if (event.key === 'a' || event.key === 'A') {{
                    controls.autoRotate = !controls.autoRotate;
                }}
            }});

            function animate() {{
                requestAnimationFrame(animate);
                controls.update();
                renderer.render(scene, camera);
            }}
            animate();

            window.addEventListener('resize', () => {{
                camera.aspect = container.clientWidth / container.clientHeight;
                camera.updateProjectionMatrix();
                renderer.setSize(container.clientWidth, container.clientHeight);
            }});
        </script>
    </body>
    </html>
    """

    return html_template
